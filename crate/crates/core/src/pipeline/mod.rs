//! Post-campaign analysis: ingestion, quality, filtering, uncertainty,
//! binning and packaging.

pub mod curve;
pub mod fair;
pub mod filter;
pub mod ingest;
pub mod quality;
pub mod uncertainty;

use std::io;
use std::path::Path;

use crate::config::Config;

pub use curve::{bin_curve, Curve, CurveBin, CurvePoint};
pub use fair::{package_fair, verify_package, PackageError, PackageInputs, Provenance};
pub use filter::{filter_valid, keep_for_curve};
pub use ingest::{for_each_record, load_campaign, IngestError, IngestSummary};
pub use quality::{quality_report, ClockBound, QualityAccumulator, QualityReport};
pub use uncertainty::{propagate_uncertainty, UncertaintyBudget, UncertaintyInputs};

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub ingest: IngestSummary,
    pub quality: QualityReport,
    pub curve_input: u64,
    /// Fraction of records kept for curve fitting.
    pub retention: f64,
    pub curve: Curve,
}

impl Analysis {
    pub fn summary_lines(&self) -> Vec<String> {
        let q = &self.quality;
        let mut v = vec![
            format!("records={}", q.records),
            format!("expected_records={}", q.expected),
            format!("completeness={:.6}", q.completeness),
            format!("validity={:.6}", q.validity),
            format!("duplicates={}", q.duplicates),
            format!("out_of_sequence={}", q.out_of_sequence),
            format!("integrity_events={}", q.integrity_events),
            format!("timeliness_s={:.6}", q.timeliness_s),
            format!("retention={:.6}", self.retention),
            format!("curve_bins={}", self.curve.bins.len()),
            format!("suppressed_bins={}", self.curve.suppressed.len()),
            format!("parse_errors={}", self.ingest.errors.len()),
            format!("uncommitted_rows={}", self.ingest.uncommitted_rows),
        ];
        if let Some(p) = self.curve.peak() {
            v.push(format!("peak_lambda_low={:.4}", p.lambda_low));
            v.push(format!("peak_cp_mean={:.6}", p.cp_mean));
        }
        v
    }
}

/// Streams a log directory through the quality, filter and binning stages.
/// `span_s` is the campaign length if known.
pub fn analyze_logs(
    log_dir: &Path,
    config: &Config,
    span_s: Option<f64>,
    bin_width: f64,
    min_bin_count: usize,
) -> io::Result<Analysis> {
    let mut acc = QualityAccumulator::new(
        config.sample_rate_hz as f64,
        ClockBound {
            drift_ppm: config.clock.drift_ppm,
            sync_interval_s: config.clock.sync_interval_s,
        },
    );
    let mut points = Vec::new();
    let mut kept = 0u64;
    let ingest = for_each_record(log_dir, |r| {
        acc.observe(&r);
        if keep_for_curve(&r) {
            kept += 1;
            if let (Some(cp), Some(lambda)) = (r.cp, r.tsr) {
                let inputs = uncertainty::record_inputs(config, &r);
                let u = propagate_uncertainty(&inputs, r.wind_speed_mps.max(config.cutin_wind_mps))
                    .map(|b| b.u_cp_rel)
                    .unwrap_or(0.0);
                points.push(CurvePoint { lambda, cp, u_cp_rel: u });
            }
        }
    })?;
    acc.add_integrity_events(ingest.integrity_events);
    let quality = acc.finish(span_s);
    let retention = if quality.records == 0 {
        0.0
    } else {
        kept as f64 / quality.records as f64
    };
    let curve = bin_curve(&points, bin_width, min_bin_count);
    Ok(Analysis {
        ingest,
        quality,
        curve_input: points.len() as u64,
        retention,
        curve,
    })
}
