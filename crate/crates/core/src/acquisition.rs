//! Firmware acquisition path: pulse counting, EMA filtering, range
//! validation and onboard derived quantities.

use std::f64::consts::TAU;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::config::Config;
use crate::flags::QualityFlags;
use crate::model::{Channel, Record, Timestamp, TurbineGeometry, BETZ_LIMIT};
use crate::sim::SensorFrame;

/// Specific gas constant of dry air, J/(kg·K).
pub const R_DRY_AIR: f64 = 287.05;

/// Hall pulse counter shared between the interrupt context and the
/// sampling tick. Increments never block and the tick drains the window
/// with a single atomic swap.
#[derive(Debug, Clone, Default)]
pub struct PulseCounter {
    count: Arc<AtomicU64>,
}

impl PulseCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interrupt handler body: one relaxed increment, nothing else.
    #[inline]
    pub fn isr_on_pulse(&self) {
        self.count.fetch_add(1, Ordering::Relaxed);
    }

    pub fn read(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    /// Reads and resets the window in one indivisible step.
    pub fn take_window(&self) -> u64 {
        self.count.swap(0, Ordering::AcqRel)
    }
}

/// Free-function form of [`PulseCounter::isr_on_pulse`].
pub fn isr_on_pulse(counter: &PulseCounter) {
    counter.isr_on_pulse();
}

/// `(rpm, ω)` from the pulses counted over a window.
pub fn compute_rpm(pulses: u64, window_s: f64, pulses_per_rev: u32) -> (f64, f64) {
    debug_assert!(window_s > 0.0 && pulses_per_rev >= 1);
    let rpm = 60.0 * pulses as f64 / (pulses_per_rev as f64 * window_s);
    (rpm, rpm * TAU / 60.0)
}

/// Exponential moving average. The first sample initialises the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ema {
    alpha: f64,
    value: Option<f64>,
}

impl Ema {
    pub fn new(alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha out of (0,1]");
        Self { alpha, value: None }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let y = match self.value {
            None => x,
            Some(prev) => self.alpha * x + (1.0 - self.alpha) * prev,
        };
        self.value = Some(y);
        y
    }
}

/// Functional form: `(state, x) -> (state', y)`.
pub fn ema_step(state: Ema, x: f64) -> (Ema, f64) {
    let mut s = state;
    let y = s.step(x);
    (s, y)
}

/// Samples needed for a unit step to reach 95 %.
pub fn ema_settling_samples(alpha: f64) -> u32 {
    (0.05f64.ln() / (1.0 - alpha).ln()).ceil() as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DensityError {
    #[error("temperature {0} °C outside physical range")]
    Temperature(f64),
    #[error("pressure {0} Pa outside [80000, 110000]")]
    Pressure(f64),
}

/// Dry-air ideal gas density. Humidity is not corrected for.
pub fn air_density(temp_c: f64, pressure_pa: f64) -> Result<f64, DensityError> {
    if !(temp_c > -60.0 && temp_c < 80.0) {
        return Err(DensityError::Temperature(temp_c));
    }
    if !(80_000.0..=110_000.0).contains(&pressure_pa) {
        return Err(DensityError::Pressure(pressure_pa));
    }
    Ok(pressure_pa / (R_DRY_AIR * (temp_c + 273.15)))
}

/// `Cp = P / (½ ρ A v³)`. Callers check the cut-in speed first.
pub fn compute_cp(power_w: f64, rho: f64, area_m2: f64, wind_mps: f64) -> f64 {
    power_w / (0.5 * rho * area_m2 * wind_mps.powi(3))
}

/// `λ = ω R / v`. Callers check the cut-in speed first.
pub fn compute_lambda(omega_rad_s: f64, radius_m: f64, wind_mps: f64) -> f64 {
    omega_rad_s * radius_m / wind_mps
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeLimits {
    pub wind_max_mps: f64,
    pub rpm_max: f64,
}

impl Default for RangeLimits {
    fn default() -> Self {
        Self {
            wind_max_mps: 25.0,
            rpm_max: 500.0,
        }
    }
}

/// Flags to add for out-of-range raw values. The record is not touched.
pub fn validate_sample(record: &Record, limits: &RangeLimits) -> QualityFlags {
    let mut flags = QualityFlags::empty();
    let v = record.wind_speed_mps;
    if !(0.0..=limits.wind_max_mps).contains(&v) {
        flags |= QualityFlags::RANGE_WIND;
    }
    let rpm = record.rotor_rpm;
    if !(0.0..=limits.rpm_max).contains(&rpm) {
        flags |= QualityFlags::RANGE_RPM;
    }
    if record.power_w < 0.0 {
        flags |= QualityFlags::REVERSE_CURRENT;
    }
    flags
}

/// Clock inputs for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickStamp {
    pub timestamp: Timestamp,
    pub synced: bool,
}

/// State owned by the sampling tick: filters, last-known-good readings
/// and the pulse window.
#[derive(Debug, Clone)]
pub struct Acquisition {
    geometry: TurbineGeometry,
    limits: RangeLimits,
    cutin_wind_mps: f64,
    window_s: f64,
    counter: PulseCounter,
    wind_filter: Ema,
    power_filter: Ema,
    last_good: [f64; 6],
}

impl Acquisition {
    pub fn new(config: &Config) -> Self {
        Self {
            geometry: config.geometry,
            limits: RangeLimits {
                wind_max_mps: config.wind_max_mps,
                rpm_max: config.rpm_max,
            },
            cutin_wind_mps: config.cutin_wind_mps,
            window_s: config.tick_s(),
            counter: PulseCounter::new(),
            wind_filter: Ema::new(config.ema_alpha),
            power_filter: Ema::new(config.ema_alpha),
            last_good: [0.0, 0.0, 0.0, 15.0, 101_325.0, 50.0],
        }
    }

    /// Handle for the interrupt context.
    pub fn counter(&self) -> PulseCounter {
        self.counter.clone()
    }

    pub fn filtered_wind(&self) -> Option<f64> {
        self.wind_filter.value()
    }

    /// Builds one record from the sensors and the pulse window, then
    /// resets the window. A failed channel contributes its last good
    /// value and marks the record `SENSOR_FAULT`.
    pub fn acquire_tick(&mut self, frame: &SensorFrame, stamp: TickStamp) -> Record {
        let pulses = self.counter.take_window();
        let (rpm, omega) = compute_rpm(pulses, self.window_s, self.geometry.pulses_per_revolution);

        let mut flags = QualityFlags::empty();
        let mut raw = [0.0; 6];
        let mut failed = [false; 6];
        for channel in Channel::ALL {
            let i = channel.index();
            match frame.readings[i] {
                Some(v) => {
                    raw[i] = v;
                    self.last_good[i] = v;
                }
                None => {
                    raw[i] = self.last_good[i];
                    failed[i] = true;
                    flags |= QualityFlags::SENSOR_FAULT;
                }
            }
        }
        let voltage = raw[Channel::Voltage.index()];
        let current = raw[Channel::Current.index()];
        let mut record = Record {
            timestamp: stamp.timestamp,
            wind_speed_mps: raw[Channel::Wind.index()],
            rotor_rpm: rpm,
            rotor_omega_rad_s: omega,
            voltage_v: voltage,
            current_a: current,
            power_w: voltage * current,
            temp_c: raw[Channel::Temp.index()],
            pressure_pa: raw[Channel::Pressure.index()],
            humidity_pct: raw[Channel::Humidity.index()],
            air_density_kg_m3: None,
            cp: None,
            tsr: None,
            flags: QualityFlags::empty(),
        };
        flags |= validate_sample(&record, &self.limits);
        if !stamp.synced {
            flags |= QualityFlags::CLOCK_UNSYNCED;
        }

        // Only validated samples feed the filters.
        let wind_ok = !failed[Channel::Wind.index()] && !flags.contains(QualityFlags::RANGE_WIND);
        if wind_ok {
            self.wind_filter.step(record.wind_speed_mps);
        }
        let power_ok = !failed[Channel::Voltage.index()] && !failed[Channel::Current.index()];
        if power_ok {
            self.power_filter.step(record.power_w);
        }

        match air_density(record.temp_c, record.pressure_pa) {
            Ok(rho) => record.air_density_kg_m3 = Some(rho),
            Err(_) => flags |= QualityFlags::SENSOR_FAULT,
        }

        let wind = self.wind_filter.value().unwrap_or(0.0);
        if wind < self.cutin_wind_mps {
            flags |= QualityFlags::BELOW_CUTIN;
        } else {
            record.tsr = Some(compute_lambda(omega, self.geometry.rotor_radius_m, wind));
            if let (Some(rho), Some(power)) = (record.air_density_kg_m3, self.power_filter.value()) {
                let cp = compute_cp(power, rho, self.geometry.swept_area_m2, wind);
                if cp > BETZ_LIMIT {
                    flags |= QualityFlags::BETZ_EXCEEDED;
                }
                record.cp = Some(cp);
            }
        }
        record.flags = flags;
        record.canonical()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn isr_increments_by_one() {
        let c = PulseCounter::new();
        assert_eq!(c.read(), 0);
        c.isr_on_pulse();
        assert_eq!(c.read(), 1);
        for _ in 0..999 {
            isr_on_pulse(&c);
        }
        assert_eq!(c.read(), 1000);
        assert_eq!(c.take_window(), 1000);
        assert_eq!(c.read(), 0);
    }

    #[test]
    fn concurrent_increments_are_never_torn_or_lost() {
        let counter = PulseCounter::new();
        let isr = counter.clone();
        let per_thread = 200_000u64;
        let producer = std::thread::spawn(move || {
            for _ in 0..per_thread {
                isr.isr_on_pulse();
            }
        });
        let mut drained = 0u64;
        let mut last_seen = 0u64;
        while !producer.is_finished() {
            let seen = counter.read();
            // Between resets the count only grows.
            assert!(seen >= last_seen || seen == 0);
            last_seen = seen;
            if seen > 10_000 {
                drained += counter.take_window();
                last_seen = 0;
            }
        }
        producer.join().unwrap();
        drained += counter.take_window();
        assert_eq!(drained, per_thread);
    }

    #[test]
    fn rpm_from_pulses() {
        let (rpm, omega) = compute_rpm(4, 1.0, 4);
        assert_eq!(rpm, 60.0);
        assert!(close(omega, std::f64::consts::TAU, 1e-12));
        assert_eq!(compute_rpm(0, 1.0, 4), (0.0, 0.0));
        let (rpm, omega) = compute_rpm(100, 10.0, 4);
        assert_eq!(rpm, 150.0);
        assert!(close(omega, 15.708, 1e-3));
    }

    #[test]
    fn ema_alpha_one_is_identity() {
        let mut f = Ema::new(1.0);
        for x in [3.0, -1.0, 7.5, 0.0] {
            assert_eq!(f.step(x), x);
        }
    }

    #[test]
    fn ema_constant_input_is_fixed_point() {
        let mut f = Ema::new(0.2);
        for _ in 0..50 {
            assert_eq!(f.step(4.2), 4.2);
        }
        let (s, y) = ema_step(Ema::new(0.3), 9.0);
        assert_eq!(y, 9.0);
        assert_eq!(s.value(), Some(9.0));
    }

    #[test]
    fn ema_variance_matches_closed_form() {
        let alpha = 0.2;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut f = Ema::new(alpha);
        let n = 10_000;
        let ys: Vec<f64> = (0..n)
            .map(|_| f.step(StandardNormal.sample(&mut rng)))
            .collect();
        let tail = &ys[100..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let var = tail.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / tail.len() as f64;
        let theory = alpha / (2.0 - alpha);
        assert!((var - theory).abs() / theory < 0.10, "var {var} theory {theory}");
    }

    #[test]
    fn ema_stays_within_input_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut f = Ema::new(0.37);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..1000 {
            let x: f64 = StandardNormal.sample(&mut rng);
            lo = lo.min(x);
            hi = hi.max(x);
            let y = f.step(x);
            assert!(y >= lo - 1e-12 && y <= hi + 1e-12);
        }
    }

    #[test]
    fn ema_settling_at_default_alpha() {
        assert_eq!(ema_settling_samples(0.2), 14);
        let mut f = Ema::new(0.2);
        f.step(0.0);
        let n = (1..100).find(|_| f.step(1.0) >= 0.95).unwrap();
        assert_eq!(n, 14);
    }

    #[test]
    fn air_density_ideal_gas_points() {
        // p / (287.05 · T)
        assert!(close(air_density(15.0, 101_325.0).unwrap(), 1.2250, 5e-5));
        assert!(close(air_density(30.0, 101_325.0).unwrap(), 1.1644, 5e-5));
        // Linear in pressure: ρ/p is constant at fixed temperature.
        let lo = air_density(10.0, 82_000.0).unwrap();
        let hi = air_density(10.0, 108_000.0).unwrap();
        assert!(close(hi / lo, 108_000.0 / 82_000.0, 1e-12));
    }

    #[test]
    fn air_density_rejects_unphysical_inputs() {
        assert!(air_density(-70.0, 101_325.0).is_err());
        assert!(air_density(15.0, 70_000.0).is_err());
        assert!(air_density(15.0, 120_000.0).is_err());
    }

    #[test]
    fn cp_direct_evaluation() {
        assert!(close(compute_cp(300.0, 1.225, 2.0, 10.0), 300.0 / 1225.0, 1e-12));
        assert_eq!(compute_cp(0.0, 1.225, 2.0, 10.0), 0.0);
        let over = compute_cp(1000.0, 1.225, 2.0, 10.0);
        assert!(close(over, 0.8163, 1e-4) && over > BETZ_LIMIT);
        assert!(compute_cp(-20.0, 1.225, 2.0, 10.0) < 0.0);
    }

    #[test]
    fn cp_and_lambda_scaling_identities() {
        let base = compute_cp(123.4, 1.19, 1.7, 7.3);
        for k in [0.5, 2.0, 3.7] {
            let scaled = compute_cp(k * 123.4, 1.19, 1.7, 7.3);
            assert!(((scaled - k * base) / (k * base)).abs() < 1e-12);
        }
        assert_eq!(compute_lambda(20.0, 0.5, 10.0), 1.0);
        assert_eq!(compute_lambda(0.0, 0.5, 10.0), 0.0);
        let l = compute_lambda(13.1, 0.5, 6.2);
        assert!(((compute_lambda(26.2, 0.5, 6.2) - 2.0 * l) / l).abs() < 1e-12);
        assert!(((compute_lambda(13.1, 0.5, 12.4) - 0.5 * l) / l).abs() < 1e-12);
    }

    fn record(v: f64, rpm: f64, p: f64) -> Record {
        Record {
            timestamp: Timestamp::new(0, 0),
            wind_speed_mps: v,
            rotor_rpm: rpm,
            rotor_omega_rad_s: rpm * TAU / 60.0,
            voltage_v: 10.0,
            current_a: p / 10.0,
            power_w: p,
            temp_c: 15.0,
            pressure_pa: 101_325.0,
            humidity_pct: 60.0,
            air_density_kg_m3: None,
            cp: None,
            tsr: None,
            flags: QualityFlags::empty(),
        }
    }

    #[test]
    fn range_checks() {
        let l = RangeLimits::default();
        assert_eq!(validate_sample(&record(26.0, 100.0, 50.0), &l), QualityFlags::RANGE_WIND);
        assert_eq!(validate_sample(&record(-0.1, 100.0, 50.0), &l), QualityFlags::RANGE_WIND);
        assert_eq!(validate_sample(&record(10.0, 501.0, 50.0), &l), QualityFlags::RANGE_RPM);
        assert_eq!(validate_sample(&record(10.0, 100.0, -1.0), &l), QualityFlags::REVERSE_CURRENT);
        assert!(validate_sample(&record(10.0, 100.0, 50.0), &l).is_empty());
        assert!(validate_sample(&record(25.0, 500.0, 0.0), &l).is_empty());
    }

    #[test]
    fn validation_never_mutates() {
        let r = record(40.0, 900.0, -5.0);
        let before = r.clone();
        let _ = validate_sample(&r, &RangeLimits::default());
        assert_eq!(r, before);
    }

    fn frame(v: f64, volts: f64, amps: f64, pulses: u64) -> SensorFrame {
        SensorFrame {
            readings: [Some(v), Some(volts), Some(amps), Some(15.0), Some(101_325.0), Some(70.0)],
            pulses,
        }
    }

    fn synced(secs: i64) -> TickStamp {
        TickStamp {
            timestamp: Timestamp::new(secs, 0),
            synced: true,
        }
    }

    fn feed(acq: &Acquisition, pulses: u64) {
        let c = acq.counter();
        for _ in 0..pulses {
            c.isr_on_pulse();
        }
    }

    #[test]
    fn nominal_tick_is_fully_populated() {
        let config = Config::reference();
        let mut acq = Acquisition::new(&config);
        feed(&acq, 16);
        let r = acq.acquire_tick(&frame(6.0, 28.0, 2.8, 16), synced(100));
        assert!(r.flags.is_empty(), "{}", r.flags);
        assert_eq!(r.rotor_rpm, 240.0);
        assert_eq!(r.power_w, 78.4);
        assert!(r.air_density_kg_m3.is_some());
        // ω = 8π, λ = ωR/v
        assert_eq!(r.tsr, Some(((8.0 * std::f64::consts::PI * 0.5 / 6.0) * 1e4).round() / 1e4));
        let cp = 78.4 / (0.5 * r.air_density_kg_m3.unwrap() * 2.0 * 216.0);
        assert!(close(r.cp.unwrap(), cp, 1e-4));
    }

    #[test]
    fn below_cutin_skips_derived_values() {
        let mut acq = Acquisition::new(&Config::reference());
        let r = acq.acquire_tick(&frame(0.5, 0.0, 0.0, 0), synced(1));
        assert!(r.flags.contains(QualityFlags::BELOW_CUTIN));
        assert_eq!(r.cp, None);
        assert_eq!(r.tsr, None);
        assert!(r.air_density_kg_m3.is_some());
    }

    #[test]
    fn failed_read_keeps_last_good_and_flags() {
        let mut acq = Acquisition::new(&Config::reference());
        acq.acquire_tick(&frame(6.0, 28.0, 2.8, 0), synced(1));
        let mut f = frame(9.0, 28.0, 2.8, 0);
        f.readings[Channel::Wind.index()] = None;
        let r = acq.acquire_tick(&f, synced(2));
        assert!(r.flags.contains(QualityFlags::SENSOR_FAULT));
        assert_eq!(r.wind_speed_mps, 6.0);
    }

    #[test]
    fn out_of_range_wind_is_kept_raw_but_not_filtered() {
        let mut acq = Acquisition::new(&Config::reference());
        acq.acquire_tick(&frame(6.0, 28.0, 2.8, 0), synced(1));
        let r = acq.acquire_tick(&frame(40.0, 28.0, 2.8, 0), synced(2));
        assert!(r.flags.contains(QualityFlags::RANGE_WIND));
        assert_eq!(r.wind_speed_mps, 40.0);
        assert_eq!(acq.filtered_wind(), Some(6.0));
    }

    #[test]
    fn unsynced_clock_flags_record() {
        let mut acq = Acquisition::new(&Config::reference());
        let stamp = TickStamp {
            timestamp: Timestamp::new(5, 0),
            synced: false,
        };
        let r = acq.acquire_tick(&frame(6.0, 28.0, 2.8, 0), stamp);
        assert!(r.flags.contains(QualityFlags::CLOCK_UNSYNCED));
    }

    #[test]
    fn super_betz_sample_flagged_not_clipped() {
        let mut acq = Acquisition::new(&Config::reference());
        let r = acq.acquire_tick(&frame(5.0, 60.0, 10.0, 0), synced(1));
        assert!(r.flags.contains(QualityFlags::BETZ_EXCEEDED));
        assert!(r.cp.unwrap() > BETZ_LIMIT);
    }

    #[test]
    fn pulse_window_resets_each_tick() {
        let mut acq = Acquisition::new(&Config::reference());
        feed(&acq, 8);
        let a = acq.acquire_tick(&frame(6.0, 28.0, 2.8, 0), synced(1));
        let b = acq.acquire_tick(&frame(6.0, 28.0, 2.8, 0), synced(2));
        assert_eq!(a.rotor_rpm, 120.0);
        assert_eq!(b.rotor_rpm, 0.0);
    }
}
