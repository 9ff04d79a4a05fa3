//! Method of bins over the tip speed ratio.

use std::collections::BTreeMap;
use std::fmt::Write;

pub const CURVE_HEADER: &str = "lambda_low,lambda_high,count,cp_mean,cp_std,cp_u";

/// One valid sample for binning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub lambda: f64,
    pub cp: f64,
    /// Relative standard uncertainty of this Cp value.
    pub u_cp_rel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveBin {
    pub lambda_low: f64,
    pub lambda_high: f64,
    pub count: usize,
    pub cp_mean: f64,
    /// Population standard deviation; 0 for a single sample.
    pub cp_std: f64,
    /// Statistical and propagated instrument uncertainty combined.
    pub cp_uncertainty: f64,
    pub single_sample: bool,
}

impl CurveBin {
    pub fn std_error(&self) -> f64 {
        self.cp_std / (self.count as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Curve {
    pub bins: Vec<CurveBin>,
    /// `(lambda_low, lambda_high, count)` of bins below the minimum count.
    pub suppressed: Vec<(f64, f64, usize)>,
}

impl Curve {
    /// Bin with the largest mean Cp.
    pub fn peak(&self) -> Option<&CurveBin> {
        self.bins
            .iter()
            .max_by(|a, b| a.cp_mean.total_cmp(&b.cp_mean))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CURVE_HEADER);
        s.push('\n');
        for b in &self.bins {
            let _ = writeln!(
                s,
                "{:.4},{:.4},{},{:.6},{:.6},{:.6}",
                b.lambda_low, b.lambda_high, b.count, b.cp_mean, b.cp_std, b.cp_uncertainty
            );
        }
        s
    }
}

pub fn bin_index(lambda: f64, width: f64) -> i64 {
    (lambda / width).floor() as i64
}

/// Groups points into `[k·w, (k+1)·w)` and summarises each group. Sums run
/// in input order.
pub fn bin_curve(points: &[CurvePoint], width: f64, min_bin_count: usize) -> Curve {
    assert!(width > 0.0, "bin width must be > 0");
    let mut groups: BTreeMap<i64, Vec<&CurvePoint>> = BTreeMap::new();
    for p in points {
        groups.entry(bin_index(p.lambda, width)).or_default().push(p);
    }
    let mut curve = Curve::default();
    for (k, members) in groups {
        let low = k as f64 * width;
        let high = (k + 1) as f64 * width;
        let n = members.len();
        if n < min_bin_count {
            curve.suppressed.push((low, high, n));
            continue;
        }
        let mean = members.iter().map(|p| p.cp).sum::<f64>() / n as f64;
        let var = members.iter().map(|p| (p.cp - mean).powi(2)).sum::<f64>() / n as f64;
        let std = if n >= 2 { var.sqrt() } else { 0.0 };
        let u_rel = members.iter().map(|p| p.u_cp_rel).sum::<f64>() / n as f64;
        let se = std / (n as f64).sqrt();
        curve.bins.push(CurveBin {
            lambda_low: low,
            lambda_high: high,
            count: n,
            cp_mean: mean,
            cp_std: std,
            cp_uncertainty: (se * se + (u_rel * mean).powi(2)).sqrt(),
            single_sample: n == 1,
        });
    }
    curve
}
