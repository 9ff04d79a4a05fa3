//! Five-dimension data quality report.

use std::fmt::Write;

use crate::flags::QualityFlags;
use crate::model::Record;
use crate::timekeeping::SequenceChecker;

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub expected: u64,
    pub records: u64,
    /// Recorded fraction of expected samples.
    pub completeness: f64,
    pub valid: u64,
    /// Fraction of records without range or sensor-fault flags.
    pub validity: f64,
    pub duplicates: u64,
    pub out_of_sequence: u64,
    pub integrity_events: u64,
    pub unsynced_records: u64,
    /// Worst-case timestamp error over the campaign, seconds.
    pub timeliness_s: f64,
}

impl QualityReport {
    /// Duplicate plus out-of-sequence stamps.
    pub fn consistency(&self) -> u64 {
        self.duplicates + self.out_of_sequence
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "expected_records={}", self.expected);
        let _ = writeln!(s, "records={}", self.records);
        let _ = writeln!(s, "completeness={:.6}", self.completeness);
        let _ = writeln!(s, "valid_records={}", self.valid);
        let _ = writeln!(s, "validity={:.6}", self.validity);
        let _ = writeln!(s, "duplicates={}", self.duplicates);
        let _ = writeln!(s, "out_of_sequence={}", self.out_of_sequence);
        let _ = writeln!(s, "consistency={}", self.consistency());
        let _ = writeln!(s, "integrity_events={}", self.integrity_events);
        let _ = writeln!(s, "unsynced_records={}", self.unsynced_records);
        let _ = writeln!(s, "timeliness_s={:.6}", self.timeliness_s);
        s
    }
}

/// Clock parameters the timeliness bound depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockBound {
    pub drift_ppm: f64,
    pub sync_interval_s: f64,
}

/// Streaming form of [`quality_report`]. Feed records in arrival order.
#[derive(Debug, Clone)]
pub struct QualityAccumulator {
    rate_hz: f64,
    clock: ClockBound,
    checker: SequenceChecker,
    records: u64,
    valid: u64,
    unsynced: u64,
    first: Option<i64>,
    last: Option<i64>,
    run_start: Option<i64>,
    longest_unsynced_s: f64,
    integrity_events: u64,
}

impl QualityAccumulator {
    pub fn new(rate_hz: f64, clock: ClockBound) -> Self {
        Self {
            rate_hz,
            clock,
            checker: SequenceChecker::default(),
            records: 0,
            valid: 0,
            unsynced: 0,
            first: None,
            last: None,
            run_start: None,
            longest_unsynced_s: 0.0,
            integrity_events: 0,
        }
    }

    pub fn observe(&mut self, r: &Record) {
        self.records += 1;
        if !r.is_flagged(QualityFlags::INVALID) {
            self.valid += 1;
        }
        self.checker.observe(r.timestamp);
        let t = r.timestamp.secs;
        self.first = Some(self.first.map_or(t, |f| f.min(t)));
        self.last = Some(self.last.map_or(t, |l| l.max(t)));
        if r.flags.contains(QualityFlags::CLOCK_UNSYNCED) {
            self.unsynced += 1;
            let start = *self.run_start.get_or_insert(t);
            let span = (t - start + 1) as f64;
            self.longest_unsynced_s = self.longest_unsynced_s.max(span);
        } else {
            self.run_start = None;
        }
    }

    pub fn add_integrity_events(&mut self, n: u64) {
        self.integrity_events += n;
    }

    /// `span_s` is the campaign length; without it the span runs from the
    /// first to the last stamp.
    pub fn finish(&self, span_s: Option<f64>) -> QualityReport {
        let span = span_s.unwrap_or_else(|| match (self.first, self.last) {
            (Some(f), Some(l)) => (l - f + 1) as f64,
            _ => 0.0,
        });
        let expected = (span * self.rate_hz).round() as u64;
        let distinct = self.records - self.checker.duplicates();
        let completeness = if expected == 0 {
            0.0
        } else {
            (distinct as f64 / expected as f64).min(1.0)
        };
        let validity = if self.records == 0 {
            0.0
        } else {
            self.valid as f64 / self.records as f64
        };
        let unsynced_span = self.clock.sync_interval_s.max(self.longest_unsynced_s);
        QualityReport {
            expected,
            records: self.records,
            completeness,
            valid: self.valid,
            validity,
            duplicates: self.checker.duplicates(),
            out_of_sequence: self.checker.out_of_sequence(),
            integrity_events: self.integrity_events,
            unsynced_records: self.unsynced,
            timeliness_s: 1.0 + self.clock.drift_ppm.abs() * 1e-6 * unsynced_span,
        }
    }
}

pub fn quality_report(
    records: &[Record],
    rate_hz: f64,
    span_s: Option<f64>,
    integrity_events: u64,
    clock: ClockBound,
) -> QualityReport {
    let mut acc = QualityAccumulator::new(rate_hz, clock);
    for r in records {
        acc.observe(r);
    }
    acc.add_integrity_events(integrity_events);
    acc.finish(span_s)
}
