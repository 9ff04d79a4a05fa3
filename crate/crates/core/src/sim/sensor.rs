//! Sensor corruption: Hall-effect pulse emission and the analogue ADC path.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::SensorSpec;

/// Emits whole Hall pulses from continuous rotor phase, carrying the
/// fractional remainder so no pulse is lost or invented over time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HallSensor {
    phase_pulses: f64,
}

impl HallSensor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pulses(&mut self, omega_rad_s: f64, dt: f64, pulses_per_rev: u32) -> u64 {
        debug_assert!(omega_rad_s >= 0.0 && dt > 0.0);
        self.phase_pulses += omega_rad_s * dt * pulses_per_rev as f64 / TAU;
        let whole = self.phase_pulses.floor();
        self.phase_pulses -= whole;
        whole as u64
    }

    /// Fraction of a pulse accumulated but not yet emitted.
    pub fn residual(&self) -> f64 {
        self.phase_pulses
    }
}

/// Free-function form of [`HallSensor::pulses`].
pub fn hall_pulse_count(sensor: &mut HallSensor, omega_rad_s: f64, dt: f64, pulses_per_rev: u32) -> u64 {
    sensor.pulses(omega_rad_s, dt, pulses_per_rev)
}

/// Quantises `x` onto the `2^bits` levels spanning the valid range.
pub fn quantize(x: f64, spec: &SensorSpec) -> f64 {
    let q = spec.quantum();
    let top = ((1u64 << spec.quantization_bits) - 1) as f64;
    let code = ((x - spec.valid_min) / q).round().clamp(0.0, top);
    spec.valid_min + code * q
}

/// One reading of `true_value` through noise, bias, linear correction
/// and the ADC. A stuck sensor repeats `previous` regardless of input.
pub fn sensor_read<R: Rng + ?Sized>(
    true_value: f64,
    spec: &SensorSpec,
    rng: &mut R,
    stuck: bool,
    previous: Option<f64>,
) -> f64 {
    // Draw unconditionally so the noise stream stays aligned across fault schedules.
    let z: f64 = rng.sample(StandardNormal);
    if stuck {
        if let Some(prev) = previous {
            return prev;
        }
    }
    let raw = spec.gain_correction * (true_value + spec.bias + spec.noise_std * z) + spec.offset_correction;
    quantize(raw, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_revolution_per_second() {
        let mut h = HallSensor::new();
        assert_eq!(h.pulses(TAU, 1.0, 4), 4);
        assert_eq!(h.pulses(0.0, 1.0, 4), 0);
    }

    #[test]
    fn long_run_pulses_conserve_phase() {
        let mut h = HallSensor::new();
        let total: u64 = (0..1000).map(|_| h.pulses(10.0, 0.1, 4)).sum();
        // Continuous phase oracle: 10 rad/s · 100 s · 4 / 2π
        let expected = 10.0 * 100.0 * 4.0 / TAU;
        assert!((total as f64 - expected).abs() < 1.0, "{total} vs {expected}");
        assert_eq!(total, 636);
    }

    #[test]
    fn quantization_only_error_within_one_quantum() {
        let spec = SensorSpec::ideal(0.0, 50.0, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..5000 {
            let truth = i as f64 * 0.01;
            let m = sensor_read(truth, &spec, &mut rng, false, None);
            assert!((m - truth).abs() <= 50.0 / 4096.0, "{truth} -> {m}");
        }
    }

    #[test]
    fn readings_saturate_at_range_ends() {
        let spec = SensorSpec::ideal(0.0, 50.0, 12);
        assert_eq!(quantize(-3.0, &spec), 0.0);
        assert!(quantize(80.0, &spec) < 50.0);
        assert!(quantize(80.0, &spec) > 50.0 - 2.0 * spec.quantum());
    }

    #[test]
    fn stuck_sensor_repeats_previous() {
        let spec = SensorSpec { noise_std: 0.3, ..SensorSpec::ideal(0.0, 50.0, 12) };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let first = sensor_read(7.0, &spec, &mut rng, false, None);
        for i in 0..100 {
            let m = sensor_read(7.0 + i as f64, &spec, &mut rng, true, Some(first));
            assert_eq!(m, first);
        }
    }

    #[test]
    fn gain_and_offset_applied() {
        let spec = SensorSpec {
            gain_correction: 2.0,
            offset_correction: 1.0,
            ..SensorSpec::ideal(0.0, 50.0, 24)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = sensor_read(10.0, &spec, &mut rng, false, None);
        assert!((m - 21.0).abs() < spec.quantum());
    }

    #[test]
    fn noise_moment_matches_spec() {
        let spec = SensorSpec { noise_std: 0.3, ..SensorSpec::ideal(0.0, 50.0, 12) };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| sensor_read(10.0, &spec, &mut rng, false, None)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        assert!((std - 0.3).abs() < 0.02, "std {std}");
        assert!((mean - 10.0).abs() < 0.02, "mean {mean}");
    }
}
