//! Site environment: mean-reverting wind plus slow diurnal weather cycles.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::SimConfig;

const DAY_S: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub true_wind_mps: f64,
    pub true_temp_c: f64,
    pub true_pressure_pa: f64,
    pub true_humidity_pct: f64,
    /// Logical seconds since campaign start.
    pub sim_time_s: f64,
}

/// Parameters of the discretised Ornstein-Uhlenbeck wind process and the
/// diurnal cycles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindModel {
    pub mean_mps: f64,
    pub reversion_s: f64,
    /// Stationary standard deviation.
    pub volatility_mps: f64,
    pub temp_mean_c: f64,
    pub temp_amplitude_c: f64,
    pub pressure_mean_pa: f64,
    pub pressure_amplitude_pa: f64,
    pub humidity_mean_pct: f64,
    pub humidity_amplitude_pct: f64,
    /// Seconds into the UTC day at `sim_time_s = 0`.
    pub day_offset_s: f64,
}

impl WindModel {
    pub fn from_config(sim: &SimConfig, campaign_start: i64) -> Self {
        Self {
            mean_mps: sim.wind_mean_mps,
            reversion_s: sim.wind_reversion_s,
            volatility_mps: sim.wind_volatility_mps,
            temp_mean_c: sim.temp_mean_c,
            temp_amplitude_c: sim.temp_amplitude_c,
            pressure_mean_pa: sim.pressure_mean_pa,
            pressure_amplitude_pa: sim.pressure_amplitude_pa,
            humidity_mean_pct: sim.humidity_mean_pct,
            humidity_amplitude_pct: sim.humidity_amplitude_pct,
            day_offset_s: campaign_start.rem_euclid(DAY_S as i64) as f64,
        }
    }

    /// Environment at `t` with the wind sitting at its mean.
    pub fn initial(&self) -> EnvState {
        let mut s = EnvState {
            true_wind_mps: self.mean_mps,
            true_temp_c: 0.0,
            true_pressure_pa: 0.0,
            true_humidity_pct: 0.0,
            sim_time_s: 0.0,
        };
        self.apply_weather(&mut s);
        s
    }

    fn apply_weather(&self, s: &mut EnvState) {
        let day_phase = 2.0 * PI * (s.sim_time_s + self.day_offset_s) / DAY_S;
        // Temperature peaks mid-afternoon, humidity moves opposite.
        let diurnal = (day_phase - 1.25 * PI).cos();
        s.true_temp_c = self.temp_mean_c + self.temp_amplitude_c * diurnal;
        s.true_humidity_pct =
            (self.humidity_mean_pct - self.humidity_amplitude_pct * diurnal).clamp(0.0, 100.0);
        // Semi-diurnal atmospheric tide.
        s.true_pressure_pa = self.pressure_mean_pa + self.pressure_amplitude_pa * (2.0 * day_phase).sin();
    }

    /// Advances the environment by `dt` seconds.
    pub fn step<R: Rng + ?Sized>(&self, state: &EnvState, dt: f64, rng: &mut R) -> EnvState {
        assert!(dt > 0.0, "dt must be positive");
        let decay = (-dt / self.reversion_s).exp();
        let z: f64 = rng.sample(StandardNormal);
        let diffusion = self.volatility_mps * (1.0 - decay * decay).sqrt();
        let wind = self.mean_mps + (state.true_wind_mps - self.mean_mps) * decay + diffusion * z;
        let mut next = EnvState {
            true_wind_mps: wind.max(0.0),
            sim_time_s: state.sim_time_s + dt,
            ..*state
        };
        self.apply_weather(&mut next);
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> WindModel {
        WindModel::from_config(&Config::reference().sim, 0)
    }

    #[test]
    fn zero_volatility_holds_mean() {
        let m = WindModel { volatility_mps: 0.0, ..model() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = m.initial();
        for _ in 0..1000 {
            s = m.step(&s, 1.0, &mut rng);
            assert_eq!(s.true_wind_mps, 6.0);
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let m = model();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = m.initial();
            (0..500)
                .map(|_| {
                    s = m.step(&s, 1.0, &mut rng);
                    s
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn long_run_mean_near_configured_mean() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut s = m.initial();
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            s = m.step(&s, 1.0, &mut rng);
            sum += s.true_wind_mps;
            sum_sq += s.true_wind_mps * s.true_wind_mps;
        }
        let mean = sum / n as f64;
        let std = (sum_sq / n as f64 - mean * mean).sqrt();
        assert!((mean - 6.0).abs() < 0.2, "mean {mean}");
        assert!((std - 0.8).abs() < 0.1, "std {std}");
    }

    #[test]
    fn weather_stays_in_physical_ranges() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = m.initial();
        for _ in 0..(2 * 86_400 / 60) {
            s = m.step(&s, 60.0, &mut rng);
            assert!(s.true_wind_mps >= 0.0);
            assert!((80_000.0..=110_000.0).contains(&s.true_pressure_pa));
            assert!((0.0..=100.0).contains(&s.true_humidity_pct));
            assert!((s.true_temp_c - 15.0).abs() <= 4.0 + 1e-9);
        }
    }
}
