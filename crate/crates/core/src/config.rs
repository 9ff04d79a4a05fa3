//! Validated campaign configuration and the flat `key = value` format.
//!
//! Every key is optional except the rotor geometry. Validation never
//! stops at the first problem: all violations are collected and returned
//! together.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{parse_iso8601, Channel, SensorSpec, TurbineGeometry, BETZ_LIMIT};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.message.starts_with(&self.key) {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.key, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub errors: Vec<FieldError>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.errors.len())?;
        for e in &self.errors {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

impl ConfigError {
    pub fn mentions(&self, key: &str) -> bool {
        self.errors.iter().any(|e| e.key == key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticsLevel {
    /// Every state transition.
    Full,
    /// Only transitions into or out of fault and power states.
    Faults,
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryConfig {
    pub enabled: bool,
    pub queue_capacity: usize,
    /// Messages per second.
    pub rate_limit: u32,
    pub backoff_base_s: f64,
    pub backoff_cap_s: f64,
    /// Relative jitter, e.g. 0.1 for ±10 %.
    pub backoff_jitter: f64,
    pub site_id: String,
    /// Keep a transcript of every delivered message.
    pub transcript: bool,
}

impl Default for TelemetryConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            queue_capacity: 7200,
            rate_limit: 2,
            backoff_base_s: 5.0,
            backoff_cap_s: 300.0,
            backoff_jitter: 0.1,
            site_id: "site0".to_string(),
            transcript: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClockConfig {
    pub drift_ppm: f64,
    pub sync_interval_s: f64,
    pub step_threshold_s: f64,
    /// RTC error at power-up, before the first sync.
    pub initial_offset_s: f64,
    /// Unix seconds of the first tick.
    pub campaign_start: i64,
}

/// Ground-truth generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub wind_mean_mps: f64,
    pub wind_reversion_s: f64,
    /// Stationary standard deviation of the wind process.
    pub wind_volatility_mps: f64,
    pub temp_mean_c: f64,
    pub temp_amplitude_c: f64,
    pub pressure_mean_pa: f64,
    pub pressure_amplitude_pa: f64,
    pub humidity_mean_pct: f64,
    pub humidity_amplitude_pct: f64,
    pub load_resistance_ohm: f64,
    pub rotor_time_constant_s: f64,
    /// Per-tick probability that a sample is corrupted in a way the range
    /// checks or the sensor-fault path must catch.
    pub invalid_injection_rate: f64,
    /// Piecewise-linear truth curve as `(tsr, cp)` knots.
    pub cp_curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub geometry: TurbineGeometry,
    pub sensors: [SensorSpec; 6],
    pub sample_rate_hz: u32,
    pub ema_alpha: f64,
    pub cutin_wind_mps: f64,
    pub wind_max_mps: f64,
    pub rpm_max: f64,
    pub flush_interval_s: f64,
    pub buffer_capacity: usize,
    pub sd_retry_max: u32,
    pub ring_capacity: usize,
    pub remount_interval_s: f64,
    pub telemetry: TelemetryConfig,
    pub clock: ClockConfig,
    pub sim: SimConfig,
    pub bin_width_lambda: f64,
    pub min_bin_count: usize,
    pub diagnostics: DiagnosticsLevel,
    /// Descriptive dataset metadata (title, creator, keywords, site_coordinates).
    pub metadata: BTreeMap<String, String>,
}

impl Config {
    pub fn sensor(&self, channel: Channel) -> &SensorSpec {
        &self.sensors[channel.index()]
    }

    pub fn sensor_mut(&mut self, channel: Channel) -> &mut SensorSpec {
        &mut self.sensors[channel.index()]
    }

    pub fn tick_s(&self) -> f64 {
        1.0 / self.sample_rate_hz as f64
    }

    /// Reference desk configuration: R = 0.5 m, H = 2.0 m, defaults elsewhere.
    pub fn reference() -> Config {
        validate_config(&RawConfig::parse("rotor_radius_m = 0.5\nrotor_height_m = 2.0\n").unwrap())
            .expect("reference configuration is valid")
    }
}

pub const METADATA_KEYS: [&str; 4] = ["title", "creator", "keywords", "site_coordinates"];

pub const DEFAULT_CP_CURVE: &str =
    "0:0, 0.5:0.04, 1.0:0.12, 1.5:0.22, 2.1:0.30, 2.6:0.26, 3.2:0.15, 3.8:0.05, 4.5:0";

fn default_sensor(channel: Channel) -> SensorSpec {
    let (noise_std, min, max) = match channel {
        Channel::Wind => (0.3, 0.0, 50.0),
        Channel::Voltage => (0.05, 0.0, 100.0),
        Channel::Current => (0.02, -10.0, 30.0),
        Channel::Temp => (1.0, -40.0, 85.0),
        Channel::Pressure => (100.0, 80_000.0, 110_000.0),
        Channel::Humidity => (2.0, 0.0, 100.0),
    };
    SensorSpec {
        noise_std,
        ..SensorSpec::ideal(min, max, 12)
    }
}

/// A parsed but unvalidated `key = value` document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    /// Splits the document into keys and values. Syntax problems (missing
    /// `=`, duplicate keys) are reported with line numbers.
    pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut errors = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(FieldError {
                    key: format!("line {lineno}"),
                    message: format!("expected `key = value`, found `{line}`"),
                });
                continue;
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                errors.push(FieldError {
                    key: format!("line {lineno}"),
                    message: "empty key".into(),
                });
                continue;
            }
            if let Some((first, _)) = entries.get(&key) {
                errors.push(FieldError {
                    key: key.clone(),
                    message: format!("duplicate key (first on line {first}, again on line {lineno})"),
                });
                continue;
            }
            entries.insert(key, (lineno, value.trim().to_string()));
        }
        if errors.is_empty() {
            Ok(RawConfig { entries })
        } else {
            Err(ConfigError { errors })
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Parses and validates a configuration document in one step.
pub fn load_config(text: &str) -> Result<Config, ConfigError> {
    validate_config(&RawConfig::parse(text)?)
}

struct Reader<'a> {
    raw: &'a RawConfig,
    used: Vec<&'a str>,
    errors: Vec<FieldError>,
}

impl<'a> Reader<'a> {
    fn err(&mut self, key: &str, message: impl Into<String>) {
        self.errors.push(FieldError {
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn lookup(&mut self, key: &str) -> Option<&'a str> {
        let (k, (_, v)) = self.raw.entries.get_key_value(key)?;
        self.used.push(k.as_str());
        Some(v.as_str())
    }

    fn typed<T: FromStr>(&mut self, key: &str, type_name: &str) -> Option<T> {
        let value = self.lookup(key)?;
        match value.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.err(key, format!("expected {type_name}, found `{value}`"));
                None
            }
        }
    }

    fn float(&mut self, key: &str, default: f64) -> f64 {
        match self.typed::<f64>(key, "a number") {
            Some(v) if v.is_finite() => v,
            Some(v) => {
                self.err(key, format!("expected a finite number, found `{v}`"));
                default
            }
            None => default,
        }
    }

    fn required_float(&mut self, key: &str) -> f64 {
        if self.raw.get(key).is_none() {
            self.err(key, "missing required key");
            return f64::NAN;
        }
        self.float(key, f64::NAN)
    }

    fn uint(&mut self, key: &str, default: u64) -> u64 {
        self.typed::<u64>(key, "a non-negative integer").unwrap_or(default)
    }

    fn boolean(&mut self, key: &str, default: bool) -> bool {
        match self.lookup(key) {
            None => default,
            Some("true" | "yes" | "1") => true,
            Some("false" | "no" | "0") => false,
            Some(other) => {
                self.err(key, format!("expected true or false, found `{other}`"));
                default
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        self.lookup(key).map(str::to_string)
    }

    fn check(&mut self, key: &str, ok: bool, message: &str) {
        if !ok {
            self.err(key, message.to_string());
        }
    }
}

/// Applies defaults and enforces every configuration invariant.
pub fn validate_config(raw: &RawConfig) -> Result<Config, ConfigError> {
    let mut r = Reader {
        raw,
        used: Vec::new(),
        errors: Vec::new(),
    };

    let radius = r.required_float("rotor_radius_m");
    let height = r.required_float("rotor_height_m");
    let ppr = r.uint("pulses_per_revolution", 4);
    if !radius.is_nan() {
        r.check("rotor_radius_m", radius > 0.0, "rotor_radius_m must be > 0");
    }
    if !height.is_nan() {
        r.check("rotor_height_m", height > 0.0, "rotor_height_m must be > 0");
    }
    r.check("pulses_per_revolution", ppr >= 1, "pulses_per_revolution must be >= 1");

    let mut sensors = [SensorSpec::ideal(0.0, 1.0, 12); 6];
    for channel in Channel::ALL {
        let d = default_sensor(channel);
        let name = channel.name();
        let key = |field: &str| format!("{name}.{field}");
        let spec = SensorSpec {
            noise_std: r.float(&key("noise_std"), d.noise_std),
            bias: r.float(&key("bias"), d.bias),
            gain_correction: r.float(&key("gain_correction"), d.gain_correction),
            offset_correction: r.float(&key("offset_correction"), d.offset_correction),
            quantization_bits: r.uint(&key("quantization_bits"), d.quantization_bits as u64) as u32,
            valid_min: r.float(&key("valid_min"), d.valid_min),
            valid_max: r.float(&key("valid_max"), d.valid_max),
        };
        r.check(&key("noise_std"), spec.noise_std >= 0.0, "noise_std must be >= 0");
        r.check(
            &key("valid_min"),
            spec.valid_min < spec.valid_max,
            "valid_min must be < valid_max",
        );
        r.check(
            &key("quantization_bits"),
            (1..=24).contains(&spec.quantization_bits),
            "quantization_bits out of [1, 24]",
        );
        r.check(
            &key("gain_correction"),
            spec.gain_correction != 0.0,
            "gain_correction must be non-zero",
        );
        sensors[channel.index()] = spec;
    }

    let sample_rate_hz = r.uint("sample_rate_hz", 1);
    r.check(
        "sample_rate_hz",
        matches!(sample_rate_hz, 1 | 2),
        "sample_rate_hz must be one of {1, 2}",
    );
    let ema_alpha = r.float("ema_alpha", 0.2);
    r.check("ema_alpha", ema_alpha > 0.0 && ema_alpha <= 1.0, "ema_alpha out of (0,1]");
    let cutin_wind_mps = r.float("cutin_wind_mps", 1.0);
    r.check("cutin_wind_mps", cutin_wind_mps > 0.0, "cutin_wind_mps must be > 0");
    let wind_max_mps = r.float("wind_max_mps", 25.0);
    r.check("wind_max_mps", wind_max_mps > 0.0, "wind_max_mps must be > 0");
    let rpm_max = r.float("rpm_max", 500.0);
    r.check("rpm_max", rpm_max > 0.0, "rpm_max must be > 0");

    let flush_interval_s = r.float("flush_interval_s", 60.0);
    r.check("flush_interval_s", flush_interval_s > 0.0, "flush_interval_s must be > 0");
    let buffer_capacity = r.uint("buffer_capacity", 60) as usize;
    r.check("buffer_capacity", buffer_capacity >= 1, "buffer_capacity must be >= 1");
    let sd_retry_max = r.uint("sd_retry_max", 3) as u32;
    let ring_capacity = r.uint("ring_capacity", 3600) as usize;
    r.check("ring_capacity", ring_capacity >= 1, "ring_capacity must be >= 1");
    let remount_interval_s = r.float("remount_interval_s", 60.0);
    r.check("remount_interval_s", remount_interval_s > 0.0, "remount_interval_s must be > 0");

    let telemetry = TelemetryConfig {
        enabled: r.boolean("telemetry_enabled", true),
        queue_capacity: r.uint("queue_capacity", 7200) as usize,
        rate_limit: r.uint("rate_limit", 2) as u32,
        backoff_base_s: r.float("backoff_base_s", 5.0),
        backoff_cap_s: r.float("backoff_cap_s", 300.0),
        backoff_jitter: r.float("backoff_jitter", 0.1),
        site_id: r.string("site_id").unwrap_or_else(|| "site0".to_string()),
        transcript: r.boolean("telemetry_transcript", true),
    };
    r.check("queue_capacity", telemetry.queue_capacity >= 1, "queue_capacity must be >= 1");
    r.check("rate_limit", telemetry.rate_limit >= 1, "rate_limit must be >= 1");
    r.check("backoff_base_s", telemetry.backoff_base_s > 0.0, "backoff_base_s must be > 0");
    r.check(
        "backoff_cap_s",
        telemetry.backoff_cap_s >= telemetry.backoff_base_s,
        "backoff_cap_s must be >= backoff_base_s",
    );
    r.check(
        "backoff_jitter",
        (0.0..1.0).contains(&telemetry.backoff_jitter),
        "backoff_jitter out of [0,1)",
    );
    r.check(
        "site_id",
        !telemetry.site_id.is_empty() && !telemetry.site_id.contains(['/', ' ', '#', '+']),
        "site_id must be a non-empty topic segment",
    );

    let campaign_start = match r.string("campaign_start") {
        None => parse_iso8601("2026-01-01T00:00:00Z").unwrap(),
        Some(s) => parse_iso8601(&s).unwrap_or_else(|| {
            r.err("campaign_start", format!("expected YYYY-MM-DDThh:mm:ssZ, found `{s}`"));
            0
        }),
    };
    let clock = ClockConfig {
        drift_ppm: r.float("drift_ppm", 2.0),
        sync_interval_s: r.float("sync_interval_s", 3600.0),
        step_threshold_s: r.float("step_threshold_s", 1.0),
        initial_offset_s: r.float("initial_offset_s", 0.0),
        campaign_start,
    };
    r.check("drift_ppm", clock.drift_ppm.abs() <= 50.0, "drift_ppm out of [-50, 50]");
    r.check("sync_interval_s", clock.sync_interval_s > 0.0, "sync_interval_s must be > 0");
    r.check("step_threshold_s", clock.step_threshold_s >= 0.0, "step_threshold_s must be >= 0");

    let cp_curve = match parse_cp_curve(&r.string("cp_curve").unwrap_or_else(|| DEFAULT_CP_CURVE.into())) {
        Ok(c) => c,
        Err(msg) => {
            r.err("cp_curve", msg);
            Vec::new()
        }
    };
    let sim = SimConfig {
        wind_mean_mps: r.float("wind_mean_mps", 6.0),
        wind_reversion_s: r.float("wind_reversion_s", 60.0),
        wind_volatility_mps: r.float("wind_volatility_mps", 0.8),
        temp_mean_c: r.float("temp_mean_c", 15.0),
        temp_amplitude_c: r.float("temp_amplitude_c", 4.0),
        pressure_mean_pa: r.float("pressure_mean_pa", 101_325.0),
        pressure_amplitude_pa: r.float("pressure_amplitude_pa", 150.0),
        humidity_mean_pct: r.float("humidity_mean_pct", 75.0),
        humidity_amplitude_pct: r.float("humidity_amplitude_pct", 10.0),
        load_resistance_ohm: r.float("load_resistance_ohm", 10.0),
        rotor_time_constant_s: r.float("rotor_time_constant_s", 5.0),
        invalid_injection_rate: r.float("invalid_injection_rate", 0.0),
        cp_curve,
    };
    r.check("wind_mean_mps", sim.wind_mean_mps >= 0.0, "wind_mean_mps must be >= 0");
    r.check("wind_reversion_s", sim.wind_reversion_s > 0.0, "wind_reversion_s must be > 0");
    r.check(
        "wind_volatility_mps",
        sim.wind_volatility_mps >= 0.0,
        "wind_volatility_mps must be >= 0",
    );
    let p_lo = sim.pressure_mean_pa - sim.pressure_amplitude_pa.abs();
    let p_hi = sim.pressure_mean_pa + sim.pressure_amplitude_pa.abs();
    r.check(
        "pressure_mean_pa",
        p_lo >= 80_000.0 && p_hi <= 110_000.0,
        "pressure cycle must stay within [80000, 110000] Pa",
    );
    r.check(
        "load_resistance_ohm",
        sim.load_resistance_ohm > 0.0,
        "load_resistance_ohm must be > 0",
    );
    r.check(
        "rotor_time_constant_s",
        sim.rotor_time_constant_s > 0.0,
        "rotor_time_constant_s must be > 0",
    );
    r.check(
        "invalid_injection_rate",
        (0.0..=1.0).contains(&sim.invalid_injection_rate),
        "invalid_injection_rate out of [0,1]",
    );

    let bin_width_lambda = r.float("bin_width_lambda", 0.25);
    r.check("bin_width_lambda", bin_width_lambda > 0.0, "bin_width_lambda must be > 0");
    let min_bin_count = r.uint("min_bin_count", 30) as usize;
    r.check("min_bin_count", min_bin_count >= 1, "min_bin_count must be >= 1");

    let diagnostics = match r.string("diagnostics").as_deref() {
        None | Some("full") => DiagnosticsLevel::Full,
        Some("faults") => DiagnosticsLevel::Faults,
        Some("off") => DiagnosticsLevel::Off,
        Some(other) => {
            r.err("diagnostics", format!("expected full, faults or off, found `{other}`"));
            DiagnosticsLevel::Full
        }
    };

    let mut metadata = BTreeMap::new();
    for key in METADATA_KEYS {
        if let Some(v) = r.string(key) {
            metadata.insert(key.to_string(), v);
        }
    }

    let unknown: Vec<String> = raw
        .keys()
        .filter(|k| !r.used.contains(k))
        .map(str::to_string)
        .collect();
    for key in unknown {
        r.err(&key, "unknown key");
    }

    if !r.errors.is_empty() {
        return Err(ConfigError { errors: r.errors });
    }

    Ok(Config {
        geometry: TurbineGeometry::new(radius, height, ppr as u32),
        sensors,
        sample_rate_hz: sample_rate_hz as u32,
        ema_alpha,
        cutin_wind_mps,
        wind_max_mps,
        rpm_max,
        flush_interval_s,
        buffer_capacity,
        sd_retry_max,
        ring_capacity,
        remount_interval_s,
        telemetry,
        clock,
        sim,
        bin_width_lambda,
        min_bin_count,
        diagnostics,
        metadata,
    })
}

/// Parses `tsr:cp, tsr:cp, ...` knots. Knots must be strictly increasing
/// in tsr with cp in `[0, BETZ_LIMIT]`.
pub fn parse_cp_curve(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut knots = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (l, c) = part
            .split_once(':')
            .ok_or_else(|| format!("cp_curve knot `{part}` is not `tsr:cp`"))?;
        let l: f64 = l.trim().parse().map_err(|_| format!("cp_curve tsr `{l}` is not a number"))?;
        let c: f64 = c.trim().parse().map_err(|_| format!("cp_curve cp `{c}` is not a number"))?;
        knots.push((l, c));
    }
    if knots.len() < 2 {
        return Err("cp_curve needs at least two knots".into());
    }
    if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err("cp_curve tsr knots must be strictly increasing".into());
    }
    if knots.iter().any(|&(l, c)| l < 0.0 || !(0.0..=BETZ_LIMIT).contains(&c)) {
        return Err(format!("cp_curve values must satisfy tsr >= 0 and 0 <= cp <= {BETZ_LIMIT}"));
    }
    Ok(knots)
}

/// Renders the configuration back into the flat text format.
pub fn render_config(config: &Config) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    let g = &config.geometry;
    kv("rotor_radius_m", g.rotor_radius_m.to_string());
    kv("rotor_height_m", g.rotor_height_m.to_string());
    kv("pulses_per_revolution", g.pulses_per_revolution.to_string());
    for channel in Channel::ALL {
        let s = config.sensor(channel);
        let n = channel.name();
        kv(&format!("{n}.noise_std"), s.noise_std.to_string());
        kv(&format!("{n}.bias"), s.bias.to_string());
        kv(&format!("{n}.gain_correction"), s.gain_correction.to_string());
        kv(&format!("{n}.offset_correction"), s.offset_correction.to_string());
        kv(&format!("{n}.quantization_bits"), s.quantization_bits.to_string());
        kv(&format!("{n}.valid_min"), s.valid_min.to_string());
        kv(&format!("{n}.valid_max"), s.valid_max.to_string());
    }
    kv("sample_rate_hz", config.sample_rate_hz.to_string());
    kv("ema_alpha", config.ema_alpha.to_string());
    kv("cutin_wind_mps", config.cutin_wind_mps.to_string());
    kv("wind_max_mps", config.wind_max_mps.to_string());
    kv("rpm_max", config.rpm_max.to_string());
    kv("flush_interval_s", config.flush_interval_s.to_string());
    kv("buffer_capacity", config.buffer_capacity.to_string());
    kv("sd_retry_max", config.sd_retry_max.to_string());
    kv("ring_capacity", config.ring_capacity.to_string());
    kv("remount_interval_s", config.remount_interval_s.to_string());
    let t = &config.telemetry;
    kv("telemetry_enabled", t.enabled.to_string());
    kv("queue_capacity", t.queue_capacity.to_string());
    kv("rate_limit", t.rate_limit.to_string());
    kv("backoff_base_s", t.backoff_base_s.to_string());
    kv("backoff_cap_s", t.backoff_cap_s.to_string());
    kv("backoff_jitter", t.backoff_jitter.to_string());
    kv("site_id", t.site_id.clone());
    kv("telemetry_transcript", t.transcript.to_string());
    let c = &config.clock;
    kv("drift_ppm", c.drift_ppm.to_string());
    kv("sync_interval_s", c.sync_interval_s.to_string());
    kv("step_threshold_s", c.step_threshold_s.to_string());
    kv("initial_offset_s", c.initial_offset_s.to_string());
    kv(
        "campaign_start",
        crate::model::Timestamp::new(c.campaign_start, 0).iso8601(),
    );
    let s = &config.sim;
    kv("wind_mean_mps", s.wind_mean_mps.to_string());
    kv("wind_reversion_s", s.wind_reversion_s.to_string());
    kv("wind_volatility_mps", s.wind_volatility_mps.to_string());
    kv("temp_mean_c", s.temp_mean_c.to_string());
    kv("temp_amplitude_c", s.temp_amplitude_c.to_string());
    kv("pressure_mean_pa", s.pressure_mean_pa.to_string());
    kv("pressure_amplitude_pa", s.pressure_amplitude_pa.to_string());
    kv("humidity_mean_pct", s.humidity_mean_pct.to_string());
    kv("humidity_amplitude_pct", s.humidity_amplitude_pct.to_string());
    kv("load_resistance_ohm", s.load_resistance_ohm.to_string());
    kv("rotor_time_constant_s", s.rotor_time_constant_s.to_string());
    kv("invalid_injection_rate", s.invalid_injection_rate.to_string());
    let curve: Vec<String> = s.cp_curve.iter().map(|(l, c)| format!("{l}:{c}")).collect();
    kv("cp_curve", curve.join(", "));
    kv("bin_width_lambda", config.bin_width_lambda.to_string());
    kv("min_bin_count", config.min_bin_count.to_string());
    kv(
        "diagnostics",
        match config.diagnostics {
            DiagnosticsLevel::Full => "full",
            DiagnosticsLevel::Faults => "faults",
            DiagnosticsLevel::Off => "off",
        }
        .to_string(),
    );
    for (k, v) in &config.metadata {
        kv(k, v.clone());
    }
    out
}
