//! Scheduled fault injection.
//!
//! Intervals are half-open `[start, end)`. Power outages in a schedule
//! are the periods the logger itself is unpowered, i.e. grid outages
//! minus whatever the battery bridges.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::Channel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaultKind {
    PowerOutage,
    SdFail,
    NetOutage,
    SensorStuck(Channel),
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultKind::PowerOutage => f.write_str("POWER_OUTAGE"),
            FaultKind::SdFail => f.write_str("SD_FAIL"),
            FaultKind::NetOutage => f.write_str("NET_OUTAGE"),
            FaultKind::SensorStuck(c) => write!(f, "SENSOR_STUCK {c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub kind: FaultKind,
}

impl FaultInterval {
    pub fn contains(&self, t: f64) -> bool {
        self.start_s <= t && t < self.end_s
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Faults active at one instant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ActiveFaults {
    pub power_outage: bool,
    pub sd_fail: bool,
    pub net_outage: bool,
    stuck: u8,
}

impl ActiveFaults {
    pub fn is_empty(&self) -> bool {
        *self == ActiveFaults::default()
    }

    pub fn stuck(&self, channel: Channel) -> bool {
        self.stuck & (1 << channel.index()) != 0
    }

    pub fn contains(&self, kind: FaultKind) -> bool {
        match kind {
            FaultKind::PowerOutage => self.power_outage,
            FaultKind::SdFail => self.sd_fail,
            FaultKind::NetOutage => self.net_outage,
            FaultKind::SensorStuck(c) => self.stuck(c),
        }
    }

    fn insert(&mut self, kind: FaultKind) {
        match kind {
            FaultKind::PowerOutage => self.power_outage = true,
            FaultKind::SdFail => self.sd_fail = true,
            FaultKind::NetOutage => self.net_outage = true,
            FaultKind::SensorStuck(c) => self.stuck |= 1 << c.index(),
        }
    }

    pub fn kinds(&self) -> Vec<FaultKind> {
        let mut out = Vec::new();
        if self.power_outage {
            out.push(FaultKind::PowerOutage);
        }
        if self.sd_fail {
            out.push(FaultKind::SdFail);
        }
        if self.net_outage {
            out.push(FaultKind::NetOutage);
        }
        for c in Channel::ALL {
            if self.stuck(c) {
                out.push(FaultKind::SensorStuck(c));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaultSchedule {
    intervals: Vec<FaultInterval>,
}

impl FaultSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_intervals(intervals: Vec<FaultInterval>) -> Result<Self, String> {
        let mut s = Self::new();
        for i in intervals {
            s.push(i.start_s, i.end_s, i.kind)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, start_s: f64, end_s: f64, kind: FaultKind) -> Result<(), String> {
        if start_s.is_nan() || end_s.is_nan() || start_s >= end_s {
            return Err(format!("start {start_s} must be before end {end_s}"));
        }
        self.intervals.push(FaultInterval { start_s, end_s, kind });
        self.intervals
            .sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        Ok(())
    }

    pub fn with(mut self, start_s: f64, end_s: f64, kind: FaultKind) -> Self {
        self.push(start_s, end_s, kind).expect("valid interval");
        self
    }

    pub fn intervals(&self) -> &[FaultInterval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Schedule with every interval of one kind removed.
    pub fn without(&self, kind: FaultKind) -> Self {
        Self {
            intervals: self.intervals.iter().copied().filter(|i| i.kind != kind).collect(),
        }
    }

    pub fn total_duration(&self, kind: FaultKind) -> f64 {
        self.intervals
            .iter()
            .filter(|i| i.kind == kind)
            .map(FaultInterval::duration_s)
            .sum()
    }

    /// Set of fault kinds active at logical time `t`.
    pub fn faults_active(&self, t: f64) -> ActiveFaults {
        let mut active = ActiveFaults::default();
        for i in &self.intervals {
            if i.start_s > t {
                break;
            }
            if i.contains(t) {
                active.insert(i.kind);
            }
        }
        active
    }

    /// Parses `start_s end_s KIND [channel]` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ScheduleError> {
        let mut schedule = Self::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| ScheduleError::Parse { line: line_no, message };
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() < 3 {
                return Err(err(format!("expected `start_s end_s KIND [channel]`, found `{content}`")));
            }
            let start = f64::from_str(fields[0]).map_err(|_| err(format!("bad start `{}`", fields[0])))?;
            let end = f64::from_str(fields[1]).map_err(|_| err(format!("bad end `{}`", fields[1])))?;
            let kind = match fields[2] {
                "POWER_OUTAGE" => FaultKind::PowerOutage,
                "SD_FAIL" => FaultKind::SdFail,
                "NET_OUTAGE" => FaultKind::NetOutage,
                "SENSOR_STUCK" => {
                    let ch = fields.get(3).ok_or_else(|| err("SENSOR_STUCK needs a channel".into()))?;
                    FaultKind::SensorStuck(
                        Channel::from_name(ch).ok_or_else(|| err(format!("unknown channel `{ch}`")))?,
                    )
                }
                other => return Err(err(format!("unknown fault kind `{other}`"))),
            };
            let arity = if matches!(kind, FaultKind::SensorStuck(_)) { 4 } else { 3 };
            if fields.len() != arity {
                return Err(err(format!("unexpected trailing fields in `{content}`")));
            }
            schedule.push(start, end, kind).map_err(err)?;
        }
        Ok(schedule)
    }

    pub fn render(&self) -> String {
        self.intervals
            .iter()
            .map(|i| format!("{} {} {}\n", i.start_s, i.end_s, i.kind))
            .collect()
    }

    /// Field fault profile for an unattended deployment of `duration_s`:
    ///
    /// * 4 h maintenance shutdown every 30 days, starting on day 15;
    /// * two 5 h grid outages (days 50 and 140) of which the battery
    ///   bridges `battery_s`, leaving the remainder as logger downtime;
    /// * a 30 min network outage every 7 days, starting on day 3.
    pub fn nominal(duration_s: f64, battery_s: f64) -> Self {
        const DAY: f64 = 86_400.0;
        const HOUR: f64 = 3_600.0;
        let mut s = Self::new();
        let mut add = |start: f64, end: f64, kind| {
            if start < duration_s && start < end {
                s.push(start, end.min(duration_s), kind).expect("ordered interval");
            }
        };
        let mut day = 15.0;
        while day * DAY < duration_s {
            let start = day * DAY + 8.0 * HOUR;
            add(start, start + 4.0 * HOUR, FaultKind::PowerOutage);
            day += 30.0;
        }
        for day in [50.0, 140.0] {
            let start = day * DAY + 18.0 * HOUR;
            let outage = 5.0 * HOUR;
            if battery_s < outage {
                add(start + battery_s, start + outage, FaultKind::PowerOutage);
            }
        }
        let mut day = 3.0;
        while day * DAY < duration_s {
            let start = day * DAY + 14.0 * HOUR;
            add(start, start + 0.5 * HOUR, FaultKind::NetOutage);
            day += 7.0;
        }
        s
    }
}

/// Free-function form of [`FaultSchedule::faults_active`].
pub fn faults_active(schedule: &FaultSchedule, t: f64) -> ActiveFaults {
    schedule.faults_active(t)
}
