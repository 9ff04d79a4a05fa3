//! RTC model, NTP discipline and timestamp integrity.

use std::collections::{HashSet, VecDeque};

use crate::flags::QualityFlags;
use crate::model::Timestamp;

const NS_PER_S: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncOutcome {
    /// Offset exceeded the step threshold; clock jumped to server time.
    Stepped { offset_ns: i64 },
    /// Small offset corrected in place.
    Slewed { offset_ns: i64 },
    /// No network; the clock was left alone.
    Unavailable,
}

/// Battery-backed real-time clock with a constant rate error.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockState {
    utc_ns: i64,
    drift_ppm: f64,
    step_threshold_s: f64,
    last_sync_ns: Option<i64>,
    synced: bool,
    last_stamp: Option<Timestamp>,
}

impl ClockState {
    pub fn new(utc_s: f64, drift_ppm: f64) -> Self {
        assert!(drift_ppm.abs() <= 50.0, "drift outside sanity bound");
        Self {
            utc_ns: (utc_s * NS_PER_S).round() as i64,
            drift_ppm,
            step_threshold_s: 1.0,
            last_sync_ns: None,
            synced: false,
            last_stamp: None,
        }
    }

    pub fn with_step_threshold(mut self, seconds: f64) -> Self {
        self.step_threshold_s = seconds;
        self
    }

    pub fn utc_s(&self) -> f64 {
        self.utc_ns as f64 / NS_PER_S
    }

    pub fn utc_ns(&self) -> i64 {
        self.utc_ns
    }

    pub fn drift_ppm(&self) -> f64 {
        self.drift_ppm
    }

    pub fn synced(&self) -> bool {
        self.synced
    }

    pub fn last_sync_s(&self) -> Option<f64> {
        self.last_sync_ns.map(|ns| ns as f64 / NS_PER_S)
    }

    pub fn last_stamp(&self) -> Option<Timestamp> {
        self.last_stamp
    }

    /// Advances the RTC by `true_dt` seconds of real time.
    pub fn rtc_advance(&mut self, true_dt: f64) {
        debug_assert!(true_dt > 0.0);
        let delta = true_dt * NS_PER_S * (1.0 + self.drift_ppm * 1e-6);
        self.utc_ns += delta.round() as i64;
    }

    /// Disciplines the clock against an authoritative server instant.
    /// Without network the clock and the synced flag are left as they are.
    pub fn ntp_sync(&mut self, server_utc_s: f64, network_up: bool) -> SyncOutcome {
        if !network_up {
            return SyncOutcome::Unavailable;
        }
        let server_ns = (server_utc_s * NS_PER_S).round() as i64;
        let offset_ns = server_ns - self.utc_ns;
        self.utc_ns = server_ns;
        self.synced = true;
        self.last_sync_ns = Some(server_ns);
        if offset_ns.unsigned_abs() as f64 > self.step_threshold_s * NS_PER_S {
            SyncOutcome::Stepped { offset_ns }
        } else {
            SyncOutcome::Slewed { offset_ns }
        }
    }

    /// Next timestamp. Strictly greater than every earlier stamp, even when
    /// a sync moved the clock backwards.
    pub fn stamp(&mut self) -> Timestamp {
        let secs = self.utc_ns.div_euclid(NS_PER_S as i64);
        let next = match self.last_stamp {
            Some(last) if secs <= last.secs => Timestamp::new(last.secs, last.seq + 1),
            _ => Timestamp::new(secs, 0),
        };
        self.last_stamp = Some(next);
        next
    }

    /// Worst-case error since the last sync: drift over the elapsed span
    /// plus one second of stamp resolution.
    pub fn error_bound_s(&self, seconds_since_sync: f64) -> f64 {
        self.drift_ppm.abs() * 1e-6 * seconds_since_sync + 1.0
    }
}

/// Pairwise ordering check between consecutive stamps.
pub fn check_sequence(prev: Timestamp, next: Timestamp) -> QualityFlags {
    if next == prev {
        QualityFlags::DUP_TIMESTAMP
    } else if next < prev {
        QualityFlags::OUT_OF_SEQUENCE
    } else {
        QualityFlags::empty()
    }
}

/// Stream-level detector.
///
/// Each stamp is compared with the highest stamp seen so far. A stamp
/// equal to one already seen within the lookback window is a duplicate;
/// any other stamp below the high-water mark is out of sequence.
#[derive(Debug, Clone)]
pub struct SequenceChecker {
    high_water: Option<Timestamp>,
    recent: VecDeque<Timestamp>,
    recent_set: HashSet<Timestamp>,
    window: usize,
    duplicates: u64,
    out_of_sequence: u64,
}

impl Default for SequenceChecker {
    fn default() -> Self {
        Self::with_window(4096)
    }
}

impl SequenceChecker {
    pub fn with_window(window: usize) -> Self {
        Self {
            high_water: None,
            recent: VecDeque::with_capacity(window.min(1 << 16)),
            recent_set: HashSet::new(),
            window: window.max(1),
            duplicates: 0,
            out_of_sequence: 0,
        }
    }

    pub fn observe(&mut self, ts: Timestamp) -> QualityFlags {
        let Some(hw) = self.high_water else {
            self.high_water = Some(ts);
            self.remember(ts);
            return QualityFlags::empty();
        };
        let mut anomaly = check_sequence(hw, ts);
        if anomaly == QualityFlags::OUT_OF_SEQUENCE && self.recent_set.contains(&ts) {
            anomaly = QualityFlags::DUP_TIMESTAMP;
        }
        if anomaly.contains(QualityFlags::DUP_TIMESTAMP) {
            self.duplicates += 1;
        } else if anomaly.contains(QualityFlags::OUT_OF_SEQUENCE) {
            self.out_of_sequence += 1;
            self.remember(ts);
        } else {
            self.high_water = Some(ts);
            self.remember(ts);
        }
        anomaly
    }

    fn remember(&mut self, ts: Timestamp) {
        if self.recent.len() == self.window {
            if let Some(old) = self.recent.pop_front() {
                self.recent_set.remove(&old);
            }
        }
        self.recent.push_back(ts);
        self.recent_set.insert(ts);
    }

    pub fn duplicates(&self) -> u64 {
        self.duplicates
    }

    pub fn out_of_sequence(&self) -> u64 {
        self.out_of_sequence
    }
}
