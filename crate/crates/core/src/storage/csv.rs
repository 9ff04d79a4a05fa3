//! Normative CSV row format.

use std::fmt::Write;

use thiserror::Error;

use crate::flags::QualityFlags;
use crate::model::{decimals, parse_iso8601, write_iso8601, Record, Timestamp};

pub const COLUMNS: [&str; 15] = [
    "timestamp_utc",
    "seq",
    "wind_speed_mps",
    "rotor_rpm",
    "rotor_omega_rad_s",
    "voltage_v",
    "current_a",
    "power_w",
    "temp_c",
    "pressure_pa",
    "humidity_pct",
    "air_density_kg_m3",
    "cp",
    "tsr",
    "flags",
];

pub const HEADER: &str = "timestamp_utc,seq,wind_speed_mps,rotor_rpm,rotor_omega_rad_s,voltage_v,current_a,power_w,temp_c,pressure_pa,humidity_pct,air_density_kg_m3,cp,tsr,flags";

/// Row-level parse failure. Column indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RowError {
    #[error("missing column {index} ({name})")]
    Missing { index: usize, name: &'static str },
    #[error("unexpected extra column {index}")]
    Extra { index: usize },
    #[error("column {index} ({name}): {message}")]
    Invalid {
        index: usize,
        name: &'static str,
        message: String,
    },
}

impl RowError {
    pub fn column(&self) -> usize {
        match self {
            RowError::Missing { index, .. }
            | RowError::Extra { index }
            | RowError::Invalid { index, .. } => *index,
        }
    }
}

/// Writes `x` with exactly `dp` decimals. Works on the scaled integer so
/// it is both fast and identical to the canonical rounding.
fn write_fixed(out: &mut String, x: f64, dp: i32) {
    let scale = 10i64.pow(dp as u32);
    let k = (x * scale as f64).round() as i64;
    if k < 0 {
        out.push('-');
    }
    let a = k.unsigned_abs();
    let _ = write!(out, "{}.{:0width$}", a / scale as u64, a % scale as u64, width = dp as usize);
}

fn write_opt(out: &mut String, x: Option<f64>, dp: i32) {
    if let Some(v) = x {
        write_fixed(out, v, dp);
    }
}

/// Appends one row and its trailing newline.
pub fn write_record(out: &mut String, r: &Record) {
    use decimals::*;
    write_iso8601(out, r.timestamp.secs);
    let _ = write!(out, ",{}", r.timestamp.seq);
    for (x, dp) in [
        (r.wind_speed_mps, WIND),
        (r.rotor_rpm, RPM),
        (r.rotor_omega_rad_s, OMEGA),
        (r.voltage_v, VOLTAGE),
        (r.current_a, CURRENT),
        (r.power_w, POWER),
        (r.temp_c, TEMP),
        (r.pressure_pa, PRESSURE),
        (r.humidity_pct, HUMIDITY),
    ] {
        out.push(',');
        write_fixed(out, x, dp);
    }
    for (x, dp) in [(r.air_density_kg_m3, DENSITY), (r.cp, CP), (r.tsr, TSR)] {
        out.push(',');
        write_opt(out, x, dp);
    }
    let _ = writeln!(out, ",{}", r.flags.bits());
}

/// One row without the newline.
pub fn serialize_record(r: &Record) -> String {
    let mut s = String::with_capacity(128);
    write_record(&mut s, r);
    s.pop();
    s
}

fn invalid(index: usize, message: impl Into<String>) -> RowError {
    RowError::Invalid {
        index,
        name: COLUMNS[index],
        message: message.into(),
    }
}

fn num(fields: &[&str], index: usize) -> Result<f64, RowError> {
    let v: f64 = fields[index]
        .parse()
        .map_err(|_| invalid(index, format!("not a number: `{}`", fields[index])))?;
    if !v.is_finite() {
        return Err(invalid(index, "not finite"));
    }
    Ok(v)
}

fn opt(fields: &[&str], index: usize) -> Result<Option<f64>, RowError> {
    if fields[index].is_empty() {
        Ok(None)
    } else {
        num(fields, index).map(Some)
    }
}

/// Parses one row (a trailing `\r` or `\n` is tolerated).
pub fn parse_record(row: &str) -> Result<Record, RowError> {
    let row = row.trim_end_matches(['\n', '\r']);
    let fields: Vec<&str> = row.split(',').collect();
    if fields.len() < COLUMNS.len() {
        let index = fields.len();
        return Err(RowError::Missing {
            index,
            name: COLUMNS[index],
        });
    }
    if fields.len() > COLUMNS.len() {
        return Err(RowError::Extra {
            index: COLUMNS.len(),
        });
    }
    let secs = parse_iso8601(fields[0]).ok_or_else(|| invalid(0, "expected YYYY-MM-DDThh:mm:ssZ"))?;
    let seq: u32 = fields[1]
        .parse()
        .map_err(|_| invalid(1, format!("not a sequence number: `{}`", fields[1])))?;
    let mask: u16 = fields[14]
        .parse()
        .map_err(|_| invalid(14, format!("not a bitmask: `{}`", fields[14])))?;
    let flags = QualityFlags::from_mask(mask).map_err(|e| invalid(14, e.to_string()))?;
    Ok(Record {
        timestamp: Timestamp::new(secs, seq),
        wind_speed_mps: num(&fields, 2)?,
        rotor_rpm: num(&fields, 3)?,
        rotor_omega_rad_s: num(&fields, 4)?,
        voltage_v: num(&fields, 5)?,
        current_a: num(&fields, 6)?,
        power_w: num(&fields, 7)?,
        temp_c: num(&fields, 8)?,
        pressure_pa: num(&fields, 9)?,
        humidity_pct: num(&fields, 10)?,
        air_density_kg_m3: opt(&fields, 11)?,
        cp: opt(&fields, 12)?,
        tsr: opt(&fields, 13)?,
        flags,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn sample(secs: i64, seq: u32) -> Record {
        Record {
            timestamp: Timestamp::new(secs, seq),
            wind_speed_mps: 6.12,
            rotor_rpm: 240.0,
            rotor_omega_rad_s: 25.1327,
            voltage_v: 12.5,
            current_a: 1.25,
            power_w: 15.6,
            temp_c: 15.25,
            pressure_pa: 101325.0,
            humidity_pct: 75.5,
            air_density_kg_m3: Some(1.2249),
            cp: Some(0.2941),
            tsr: Some(2.0533),
            flags: QualityFlags::empty(),
        }
    }

    #[test]
    fn header_matches_columns() {
        assert_eq!(HEADER, COLUMNS.join(","));
    }

    #[test]
    fn nominal_row() {
        let row = serialize_record(&sample(1_767_225_600, 0));
        assert_eq!(
            row,
            "2026-01-01T00:00:00Z,0,6.12,240.00,25.1327,12.500,1.250,15.6,15.25,101325.0,75.50,1.2249,0.2941,2.0533,0"
        );
        assert_eq!(row.split(',').count(), COLUMNS.len());
        assert_eq!(parse_record(&row).unwrap(), sample(1_767_225_600, 0));
    }

    #[test]
    fn absent_derived_values_are_empty() {
        let mut r = sample(0, 3);
        r.cp = None;
        r.tsr = None;
        r.flags = QualityFlags::BELOW_CUTIN;
        let row = serialize_record(&r);
        assert!(row.ends_with(",1.2249,,,64"), "{row}");
        assert_eq!(parse_record(&row).unwrap(), r);
    }

    #[test]
    fn negative_values_keep_sign() {
        let mut r = sample(0, 0);
        r.current_a = -0.05;
        r.temp_c = -3.5;
        let row = serialize_record(&r);
        assert!(row.contains(",-0.050,"));
        assert!(row.contains(",-3.50,"));
        assert_eq!(parse_record(&row).unwrap(), r);
    }

    #[test]
    fn short_rows_name_the_missing_column() {
        let row = serialize_record(&sample(0, 0));
        let cols: Vec<&str> = row.split(',').collect();
        let thirteen = cols[..13].join(",");
        assert_eq!(
            parse_record(&thirteen),
            Err(RowError::Missing { index: 13, name: "tsr" })
        );
        let fourteen = cols[..14].join(",");
        let err = parse_record(&fourteen).unwrap_err();
        assert_eq!(err.column(), 14);
        assert_eq!(err.to_string(), "missing column 14 (flags)");
    }

    #[test]
    fn malformed_fields_report_column() {
        let row = serialize_record(&sample(0, 0)).replace("240.00", "abc");
        assert_eq!(parse_record(&row).unwrap_err().column(), 3);
        let row = serialize_record(&sample(0, 0)).replace("1970", "19x0");
        assert_eq!(parse_record(&row).unwrap_err().column(), 0);
        let mut row = serialize_record(&sample(0, 0));
        row.truncate(row.len() - 1);
        row.push_str("512");
        assert_eq!(parse_record(&row).unwrap_err().column(), 14);
        let row = format!("{},extra", serialize_record(&sample(0, 0)));
        assert_eq!(parse_record(&row), Err(RowError::Extra { index: 15 }));
    }
}
