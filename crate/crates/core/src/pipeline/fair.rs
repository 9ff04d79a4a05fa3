//! Self-describing dataset package.
//!
//! Layout: `data/` (log segments), `derived/curve.csv`, `metadata.txt`,
//! `quality_report.txt`, `README.txt` and `checksums.txt`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::Config;
use crate::flags::FLAG_NAMES;
use crate::model::Channel;
use crate::pipeline::curve::Curve;
use crate::pipeline::quality::QualityReport;
use crate::storage::csv::HEADER;

pub const ENTRIES: [&str; 6] = [
    "data",
    "derived",
    "metadata.txt",
    "quality_report.txt",
    "README.txt",
    "checksums.txt",
];

/// Keys that must be present and non-empty in `metadata.txt`.
pub const REQUIRED_KEYS: [&str; 7] = [
    "title",
    "creator",
    "keywords",
    "site_coordinates",
    "deployment_start",
    "deployment_end",
    "firmware_version",
];

pub const LICENSE: &str = "CC-BY-4.0";

#[derive(Debug, Error)]
pub enum PackageError {
    #[error("metadata key {0} required")]
    MissingKey(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Where the data came from and when.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub deployment_start: String,
    pub deployment_end: String,
    pub firmware_version: String,
    pub extra: BTreeMap<String, String>,
}

pub fn build_metadata(config: &Config, provenance: &Provenance) -> BTreeMap<String, String> {
    let mut m: BTreeMap<String, String> = config.metadata.clone();
    let mut put = |k: &str, v: String| {
        if !v.is_empty() {
            m.insert(k.to_string(), v);
        }
    };
    put("deployment_start", provenance.deployment_start.clone());
    put("deployment_end", provenance.deployment_end.clone());
    put("firmware_version", provenance.firmware_version.clone());
    put("license", LICENSE.to_string());
    let g = &config.geometry;
    put("turbine_rotor_radius_m", format!("{}", g.rotor_radius_m));
    put("turbine_rotor_height_m", format!("{}", g.rotor_height_m));
    put("turbine_swept_area_m2", format!("{}", g.swept_area_m2));
    put("sample_rate_hz", config.sample_rate_hz.to_string());
    for c in Channel::ALL {
        let s = config.sensor(c);
        put(&format!("sensor.{}.gain_correction", c.name()), format!("{}", s.gain_correction));
        put(&format!("sensor.{}.offset_correction", c.name()), format!("{}", s.offset_correction));
        put(&format!("sensor.{}.noise_std", c.name()), format!("{}", s.noise_std));
    }
    for (k, v) in &provenance.extra {
        put(k, v.clone());
    }
    m
}

pub fn check_metadata(meta: &BTreeMap<String, String>) -> Result<(), PackageError> {
    for key in REQUIRED_KEYS {
        if meta.get(key).is_none_or(|v| v.trim().is_empty()) {
            return Err(PackageError::MissingKey(key.to_string()));
        }
    }
    Ok(())
}

fn readme(meta: &BTreeMap<String, String>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}", meta.get("title").map_or("", String::as_str));
    let _ = writeln!(s);
    let _ = writeln!(s, "Contents");
    let _ = writeln!(s, "  data/                 daily CSV log segments, one row per sample");
    let _ = writeln!(s, "  derived/curve.csv     binned power coefficient against tip speed ratio");
    let _ = writeln!(s, "  metadata.txt          descriptive metadata, key=value");
    let _ = writeln!(s, "  quality_report.txt    completeness, validity, consistency, integrity, timeliness");
    let _ = writeln!(s, "  checksums.txt         CRC-32 of every other file");
    let _ = writeln!(s);
    let _ = writeln!(s, "Log columns");
    let _ = writeln!(s, "  {HEADER}");
    let _ = writeln!(s, "  Lines starting with # are block footers and commit markers.");
    let _ = writeln!(s);
    let _ = writeln!(s, "Units (SI)");
    for (col, unit) in [
        ("timestamp_utc", "UTC, YYYY-MM-DDThh:mm:ssZ; seq orders samples within one second"),
        ("wind_speed_mps", "m/s"),
        ("rotor_rpm", "rev/min"),
        ("rotor_omega_rad_s", "rad/s"),
        ("voltage_v", "V"),
        ("current_a", "A"),
        ("power_w", "W"),
        ("temp_c", "degC"),
        ("pressure_pa", "Pa"),
        ("humidity_pct", "%"),
        ("air_density_kg_m3", "kg/m^3"),
        ("cp", "dimensionless"),
        ("tsr", "dimensionless"),
        ("flags", "decimal bitmask, see below"),
    ] {
        let _ = writeln!(s, "  {col:<18} {unit}");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Flags");
    for (bit, name) in FLAG_NAMES.iter().enumerate() {
        let _ = writeln!(s, "  {:>4}  {name}", 1u32 << bit);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Usage");
    let _ = writeln!(s, "  Exclude rows flagged RANGE_WIND, RANGE_RPM, SENSOR_FAULT, DUP_TIMESTAMP,");
    let _ = writeln!(s, "  OUT_OF_SEQUENCE or BELOW_CUTIN before fitting a performance curve.");
    let _ = writeln!(s, "  Verify files against checksums.txt before use.");
    let _ = writeln!(s);
    let _ = writeln!(s, "License: {LICENSE}");
    s
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.filter_map(|e| e.ok()).map(|e| e.path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(root, &p, out)?;
        } else {
            out.push(p.strip_prefix(root).unwrap_or(&p).to_path_buf());
        }
    }
    Ok(())
}

fn rel_name(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn crc_file(path: &Path) -> io::Result<u32> {
    use std::io::Read;
    let mut f = fs::File::open(path)?;
    let mut h = crc32fast::Hasher::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finalize())
}

pub struct PackageInputs<'a> {
    /// Log directory whose segments go into `data/`.
    pub log_dir: &'a Path,
    pub quality: &'a QualityReport,
    pub curve: &'a Curve,
    pub config: &'a Config,
    pub provenance: &'a Provenance,
}

/// Writes the package into `out`. Metadata is checked before anything is
/// written.
pub fn package_fair(inputs: &PackageInputs<'_>, out: &Path) -> Result<Vec<String>, PackageError> {
    let meta = build_metadata(inputs.config, inputs.provenance);
    check_metadata(&meta)?;

    let data = out.join("data");
    let derived = out.join("derived");
    fs::create_dir_all(&data)?;
    fs::create_dir_all(&derived)?;
    for seg in crate::pipeline::ingest::segment_files(inputs.log_dir)? {
        if let Some(name) = seg.file_name() {
            fs::copy(&seg, data.join(name))?;
        }
    }
    fs::write(derived.join("curve.csv"), inputs.curve.to_csv())?;
    let mut meta_text = String::new();
    for (k, v) in &meta {
        let _ = writeln!(meta_text, "{k}={v}");
    }
    fs::write(out.join("metadata.txt"), meta_text)?;
    fs::write(out.join("quality_report.txt"), inputs.quality.to_text())?;
    fs::write(out.join("README.txt"), readme(&meta))?;

    let mut files = Vec::new();
    walk(out, out, &mut files)?;
    let mut sums = String::new();
    let mut listed = Vec::new();
    for f in files {
        let name = rel_name(&f);
        if name == "checksums.txt" {
            continue;
        }
        let _ = writeln!(sums, "{:08x}  {name}", crc_file(&out.join(&f))?);
        listed.push(name);
    }
    fs::write(out.join("checksums.txt"), sums)?;
    Ok(listed)
}

/// Files whose checksum does not match, or that are listed but missing.
pub fn verify_package(dir: &Path) -> io::Result<Vec<String>> {
    let text = fs::read_to_string(dir.join("checksums.txt"))?;
    let mut bad = Vec::new();
    for line in text.lines() {
        let Some((crc, name)) = line.split_once("  ") else {
            bad.push(line.to_string());
            continue;
        };
        let ok = u32::from_str_radix(crc, 16)
            .ok()
            .zip(crc_file(&dir.join(name)).ok())
            .is_some_and(|(want, got)| want == got);
        if !ok {
            bad.push(name.to_string());
        }
    }
    Ok(bad)
}

/// Reads `metadata.txt` back.
pub fn read_metadata(dir: &Path) -> io::Result<BTreeMap<String, String>> {
    Ok(fs::read_to_string(dir.join("metadata.txt"))?
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::quality::{quality_report, ClockBound};

    fn fixture(config: &Config, out: &Path) -> Result<Vec<String>, PackageError> {
        let logs = tempfile::tempdir().unwrap();
        fs::write(logs.path().join("2026-01-01.csv"), format!("{HEADER}\n")).unwrap();
        let q = quality_report(&[], 1.0, Some(1.0), 0, ClockBound { drift_ppm: 2.0, sync_interval_s: 3600.0 });
        let prov = Provenance {
            deployment_start: "2026-01-01T00:00:00Z".into(),
            deployment_end: "2026-01-02T00:00:00Z".into(),
            firmware_version: "0.1.0".into(),
            ..Default::default()
        };
        package_fair(
            &PackageInputs {
                log_dir: logs.path(),
                quality: &q,
                curve: &Curve::default(),
                config,
                provenance: &prov,
            },
            out,
        )
    }

    fn with_metadata() -> Config {
        let mut c = Config::reference();
        for (k, v) in [
            ("title", "Test campaign"),
            ("creator", "Lab"),
            ("keywords", "wind;VAWT"),
            ("site_coordinates", "10.0,-61.0"),
        ] {
            c.metadata.insert(k.into(), v.into());
        }
        c
    }

    #[test]
    fn complete_package() {
        let out = tempfile::tempdir().unwrap();
        fixture(&with_metadata(), out.path()).unwrap();
        for e in ENTRIES {
            assert!(out.path().join(e).exists(), "{e}");
        }
        assert!(verify_package(out.path()).unwrap().is_empty());
        let meta = read_metadata(out.path()).unwrap();
        assert_eq!(meta["license"], LICENSE);
        assert_eq!(meta["turbine_swept_area_m2"], "2");
        for k in REQUIRED_KEYS {
            assert!(meta.contains_key(k));
        }
    }

    #[test]
    fn missing_site_coordinates() {
        let mut c = with_metadata();
        c.metadata.remove("site_coordinates");
        let out = tempfile::tempdir().unwrap();
        let err = fixture(&c, out.path()).unwrap_err();
        assert_eq!(err.to_string(), "metadata key site_coordinates required");
        assert!(!out.path().join("metadata.txt").exists());
    }

    #[test]
    fn tampering_detected() {
        let out = tempfile::tempdir().unwrap();
        fixture(&with_metadata(), out.path()).unwrap();
        fs::write(out.path().join("derived/curve.csv"), "x").unwrap();
        assert_eq!(verify_package(out.path()).unwrap(), vec!["derived/curve.csv"]);
    }
}
