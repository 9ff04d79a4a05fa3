//! Shared domain types: geometry, sensor specs, timestamps and records.

use std::fmt;

use chrono::{DateTime, Datelike, NaiveDate, Timelike, Utc};

use crate::flags::QualityFlags;

/// Theoretical maximum power coefficient for any wind energy extractor.
pub const BETZ_LIMIT: f64 = 0.593;

/// Rotor geometry of a helical vertical-axis turbine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbineGeometry {
    pub rotor_radius_m: f64,
    pub rotor_height_m: f64,
    pub swept_area_m2: f64,
    pub pulses_per_revolution: u32,
}

impl TurbineGeometry {
    /// Builds a geometry with the projected swept area `2·R·H`.
    pub fn new(rotor_radius_m: f64, rotor_height_m: f64, pulses_per_revolution: u32) -> Self {
        Self {
            rotor_radius_m,
            rotor_height_m,
            swept_area_m2: 2.0 * rotor_radius_m * rotor_height_m,
            pulses_per_revolution,
        }
    }
}

/// Analogue measurement channels read through the ADC path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Wind,
    Voltage,
    Current,
    Temp,
    Pressure,
    Humidity,
}

impl Channel {
    pub const ALL: [Channel; 6] = [
        Channel::Wind,
        Channel::Voltage,
        Channel::Current,
        Channel::Temp,
        Channel::Pressure,
        Channel::Humidity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Wind => "wind",
            Channel::Voltage => "voltage",
            Channel::Current => "current",
            Channel::Temp => "temp",
            Channel::Pressure => "pressure",
            Channel::Humidity => "humidity",
        }
    }

    pub fn from_name(name: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Noise, bias, linear calibration and ADC model of one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSpec {
    pub noise_std: f64,
    pub bias: f64,
    pub gain_correction: f64,
    pub offset_correction: f64,
    pub quantization_bits: u32,
    pub valid_min: f64,
    pub valid_max: f64,
}

impl SensorSpec {
    /// Ideal sensor over a range: no noise, no bias, unit gain.
    pub fn ideal(valid_min: f64, valid_max: f64, quantization_bits: u32) -> Self {
        Self {
            noise_std: 0.0,
            bias: 0.0,
            gain_correction: 1.0,
            offset_correction: 0.0,
            quantization_bits,
            valid_min,
            valid_max,
        }
    }

    pub fn quantum(&self) -> f64 {
        (self.valid_max - self.valid_min) / (1u64 << self.quantization_bits) as f64
    }
}

/// Acquisition timestamp: whole UTC second plus intra-second sequence.
///
/// Ordering is lexicographic on `(secs, seq)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Timestamp {
    /// Seconds since the Unix epoch.
    pub secs: i64,
    pub seq: u32,
}

impl Timestamp {
    pub fn new(secs: i64, seq: u32) -> Self {
        Self { secs, seq }
    }

    /// `YYYY-MM-DDThh:mm:ssZ`
    pub fn iso8601(&self) -> String {
        let mut out = String::with_capacity(20);
        write_iso8601(&mut out, self.secs);
        out
    }

    /// UTC calendar day, used for segment names.
    pub fn date(&self) -> NaiveDate {
        DateTime::<Utc>::from_timestamp(self.secs, 0)
            .map(|d| d.date_naive())
            .unwrap_or_default()
    }
}

pub(crate) fn write_iso8601(out: &mut String, secs: i64) {
    use std::fmt::Write;
    let dt = DateTime::<Utc>::from_timestamp(secs, 0).unwrap_or_default();
    let _ = write!(
        out,
        "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z",
        dt.year(),
        dt.month(),
        dt.day(),
        dt.hour(),
        dt.minute(),
        dt.second()
    );
}

/// Parses `YYYY-MM-DDThh:mm:ssZ` into Unix seconds.
pub fn parse_iso8601(s: &str) -> Option<i64> {
    let b = s.as_bytes();
    if b.len() != 20 || b[4] != b'-' || b[7] != b'-' || b[10] != b'T' || b[13] != b':' {
        return None;
    }
    if b[16] != b':' || b[19] != b'Z' {
        return None;
    }
    let num = |r: std::ops::Range<usize>| -> Option<u32> {
        let part = s.get(r)?;
        if !part.bytes().all(|c| c.is_ascii_digit()) {
            return None;
        }
        part.parse().ok()
    };
    let date = NaiveDate::from_ymd_opt(num(0..4)? as i32, num(5..7)?, num(8..10)?)?;
    let time = date.and_hms_opt(num(11..13)?, num(14..16)?, num(17..19)?)?;
    Some(time.and_utc().timestamp())
}

/// Rounds to a fixed number of decimals, normalising negative zero.
pub(crate) fn round_dp(x: f64, dp: i32) -> f64 {
    let scale = 10f64.powi(dp);
    (x * scale).round() / scale + 0.0
}

/// One timestamped acquisition sample.
///
/// Raw channel values are always populated, even for flagged samples.
/// Derived quantities are `None` when they could not be computed.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub timestamp: Timestamp,
    pub wind_speed_mps: f64,
    pub rotor_rpm: f64,
    pub rotor_omega_rad_s: f64,
    pub voltage_v: f64,
    pub current_a: f64,
    pub power_w: f64,
    pub temp_c: f64,
    pub pressure_pa: f64,
    pub humidity_pct: f64,
    pub air_density_kg_m3: Option<f64>,
    pub cp: Option<f64>,
    pub tsr: Option<f64>,
    pub flags: QualityFlags,
}

/// Fixed decimal places per CSV column, in column order after `seq`.
pub(crate) mod decimals {
    pub const WIND: i32 = 2;
    pub const RPM: i32 = 2;
    pub const OMEGA: i32 = 4;
    pub const VOLTAGE: i32 = 3;
    pub const CURRENT: i32 = 3;
    pub const POWER: i32 = 1;
    pub const TEMP: i32 = 2;
    pub const PRESSURE: i32 = 1;
    pub const HUMIDITY: i32 = 2;
    pub const DENSITY: i32 = 4;
    pub const CP: i32 = 4;
    pub const TSR: i32 = 4;
}

impl Record {
    /// Returns the record rounded to the precision the log stores, so the
    /// in-memory value equals what a later parse of the CSV row yields.
    pub fn canonical(mut self) -> Self {
        use decimals::*;
        self.wind_speed_mps = round_dp(self.wind_speed_mps, WIND);
        self.rotor_rpm = round_dp(self.rotor_rpm, RPM);
        self.rotor_omega_rad_s = round_dp(self.rotor_omega_rad_s, OMEGA);
        self.voltage_v = round_dp(self.voltage_v, VOLTAGE);
        self.current_a = round_dp(self.current_a, CURRENT);
        self.power_w = round_dp(self.power_w, POWER);
        self.temp_c = round_dp(self.temp_c, TEMP);
        self.pressure_pa = round_dp(self.pressure_pa, PRESSURE);
        self.humidity_pct = round_dp(self.humidity_pct, HUMIDITY);
        self.air_density_kg_m3 = self.air_density_kg_m3.map(|v| round_dp(v, DENSITY));
        self.cp = self.cp.map(|v| round_dp(v, CP));
        self.tsr = self.tsr.map(|v| round_dp(v, TSR));
        self
    }

    pub fn is_flagged(&self, mask: QualityFlags) -> bool {
        self.flags.intersects(mask)
    }
}
