//! Validity filtering for curve fitting.

use crate::flags::QualityFlags;
use crate::model::Record;

#[derive(Debug, Clone, PartialEq)]
pub struct Filtered<'a> {
    pub subset: Vec<&'a Record>,
    pub retention: f64,
    pub warnings: Vec<String>,
}

pub fn keep_for_curve(r: &Record) -> bool {
    !r.is_flagged(QualityFlags::CURVE_EXCLUDED)
}

/// Drops records carrying any range, fault, ordering or cut-in flag.
pub fn filter_valid(records: &[Record]) -> Filtered<'_> {
    let subset: Vec<&Record> = records.iter().filter(|r| keep_for_curve(r)).collect();
    let retention = if records.is_empty() {
        0.0
    } else {
        subset.len() as f64 / records.len() as f64
    };
    let mut warnings = Vec::new();
    if subset.is_empty() && !records.is_empty() {
        warnings.push("no records left after filtering".to_string());
    }
    Filtered {
        subset,
        retention,
        warnings,
    }
}
