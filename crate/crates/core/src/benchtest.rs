//! Named verification profiles: endurance, power-cycle recovery and field
//! shakedown.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;

use crate::campaign::{Campaign, Pacing};
use crate::config::Config;
use crate::model::Timestamp;
use crate::pipeline::quality::{quality_report, ClockBound};
use crate::sim::{stream_rng, FaultSchedule, Stream};
use crate::storage::{recover, verify, MemMedium};

pub const ENDURANCE_S: f64 = 259_200.0;
pub const SHAKEDOWN_S: f64 = 7.0 * 86_400.0;
pub const BATTERY_S: f64 = 4.0 * 3_600.0;
pub const POWER_CYCLES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Endurance72h,
    Powercycle50,
    Shakedown,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Endurance72h => "endurance72h",
            Profile::Powercycle50 => "powercycle50",
            Profile::Shakedown => "shakedown",
        }
    }

    pub fn from_name(name: &str) -> Option<Profile> {
        [Profile::Endurance72h, Profile::Powercycle50, Profile::Shakedown]
            .into_iter()
            .find(|p| p.name() == name)
    }
}

/// One checked criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub profile: Profile,
    pub checks: Vec<Check>,
}

impl BenchReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.pass)
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            pass,
            detail,
        });
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {} {}: {}",
                self.profile.name(),
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        write!(
            f,
            "{} {}",
            self.profile.name(),
            if self.pass() { "PASS" } else { "FAIL" }
        )
    }
}

fn clock_bound(config: &Config) -> ClockBound {
    ClockBound {
        drift_ppm: config.clock.drift_ppm,
        sync_interval_s: config.clock.sync_interval_s,
    }
}

pub fn run_profile(profile: Profile, config: &Config, seed: u64) -> BenchReport {
    match profile {
        Profile::Endurance72h => endurance72h(config, seed),
        Profile::Powercycle50 => powercycle50(config, seed, true),
        Profile::Shakedown => shakedown(config, seed),
    }
}

/// Three days fault-free: every tick logged, nothing corrupted.
pub fn endurance72h(config: &Config, seed: u64) -> BenchReport {
    let mut report = BenchReport {
        profile: Profile::Endurance72h,
        checks: Vec::new(),
    };
    let mut campaign = Campaign::new(config, FaultSchedule::new(), seed, MemMedium::new());
    campaign.run(ENDURANCE_S, Pacing::Max);
    let stats = campaign.stats().clone();
    let mut medium = campaign.log().medium().clone();
    let integrity = verify(&medium).map(|r| r.failures()).unwrap_or(u64::MAX);
    let (records, rec) = recover(&mut medium).expect("in-memory medium");
    let expected = (ENDURANCE_S * config.sample_rate_hz as f64) as u64;
    let q = quality_report(&records, config.sample_rate_hz as f64, Some(ENDURANCE_S), integrity, clock_bound(config));
    report.check(
        "record_count",
        records.len() as u64 == expected,
        format!("{} of {expected}", records.len()),
    );
    report.check(
        "completeness",
        q.completeness == 1.0,
        format!("{:.6}", q.completeness),
    );
    let events = integrity + rec.integrity_events() + stats.integrity_events;
    report.check("integrity_events", events == 0, events.to_string());
    report.check(
        "consistency",
        q.consistency() == 0,
        format!("{} duplicates, {} out of sequence", q.duplicates, q.out_of_sequence),
    );
    report
}

/// Outcome of one crash-and-recover iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutcome {
    pub committed: usize,
    pub recovered: usize,
    pub lost: usize,
    pub extra: usize,
    pub duplicates: usize,
    pub crashed: bool,
}

fn compare(committed: &[Timestamp], recovered: &[Timestamp]) -> (usize, usize, usize) {
    let mut seen = HashSet::with_capacity(recovered.len());
    let duplicates = recovered.iter().filter(|t| !seen.insert(**t)).count();
    let want: HashSet<&Timestamp> = committed.iter().collect();
    let lost = committed.iter().filter(|t| !seen.contains(*t)).count();
    let extra = recovered.iter().filter(|t| !want.contains(t)).count();
    (lost, extra, duplicates)
}

/// Runs a campaign, cuts power at a random byte of an active flush,
/// reboots, keeps logging and compares what the logger believed committed
/// with what recovery finds.
pub fn power_cycle_once<R: Rng>(config: &Config, seed: u64, commit_marker: bool, rng: &mut R) -> CycleOutcome {
    let mut campaign =
        Campaign::new(config, FaultSchedule::new(), seed, MemMedium::new()).track_committed();
    campaign.log_mut().set_commit_marker(commit_marker);
    let warmup = rng.gen_range(61..=600);
    for _ in 0..warmup {
        campaign.step(false);
    }
    let budget = rng.gen_range(0..8_000);
    campaign.medium_mut().crash_after(budget);
    let losses = campaign.stats().power_losses;
    let mut crashed = false;
    for _ in 0..2_000 {
        campaign.step(false);
        if campaign.stats().power_losses > losses {
            crashed = true;
            break;
        }
    }
    campaign.medium_mut().power_cycle();
    // Reboot and log for a while longer on the same card.
    for _ in 0..rng.gen_range(60..=240) {
        campaign.step(false);
    }
    let committed = campaign.committed().unwrap_or(&[]).to_vec();
    let mut medium = campaign.log().medium().clone();
    let (records, _) = recover(&mut medium).expect("in-memory medium");
    let stamps: Vec<Timestamp> = records.iter().map(|r| r.timestamp).collect();
    let (lost, extra, duplicates) = compare(&committed, &stamps);
    CycleOutcome {
        committed: committed.len(),
        recovered: stamps.len(),
        lost,
        extra,
        duplicates,
        crashed,
    }
}

/// Fifty randomised crash points. `commit_marker = false` disables the
/// marker write, which must make the profile fail.
pub fn powercycle50(config: &Config, seed: u64, commit_marker: bool) -> BenchReport {
    let mut report = BenchReport {
        profile: Profile::Powercycle50,
        checks: Vec::new(),
    };
    let mut rng = stream_rng(seed, Stream::Harness);
    let mut clean = 0;
    let mut lost = 0;
    let mut dups = 0;
    let mut extra = 0;
    let mut crashed = 0;
    for i in 0..POWER_CYCLES {
        let o = power_cycle_once(config, seed.wrapping_add(i as u64), commit_marker, &mut rng);
        if o.lost == 0 && o.duplicates == 0 && o.extra == 0 && o.committed > 0 {
            clean += 1;
        }
        lost += o.lost;
        dups += o.duplicates;
        extra += o.extra;
        crashed += o.crashed as usize;
    }
    report.check(
        "iterations",
        clean == POWER_CYCLES,
        format!("{clean}/{POWER_CYCLES} clean, {crashed} crashed mid-flush"),
    );
    report.check("committed_loss", lost == 0, lost.to_string());
    report.check("duplicates", dups == 0, dups.to_string());
    report.check("uncommitted_visible", extra == 0, extra.to_string());
    report
}

/// One week under the field fault profile.
pub fn shakedown(config: &Config, seed: u64) -> BenchReport {
    let mut report = BenchReport {
        profile: Profile::Shakedown,
        checks: Vec::new(),
    };
    let schedule = FaultSchedule::nominal(SHAKEDOWN_S, BATTERY_S);
    let mut campaign = Campaign::new(config, schedule, seed, MemMedium::new());
    campaign.run(SHAKEDOWN_S, Pacing::Max);
    let mut medium = campaign.log().medium().clone();
    let (records, rec) = recover(&mut medium).expect("in-memory medium");
    let q = quality_report(
        &records,
        config.sample_rate_hz as f64,
        Some(SHAKEDOWN_S),
        rec.integrity_events(),
        clock_bound(config),
    );
    report.check(
        "completeness",
        q.completeness > 0.95,
        format!("{:.6} (> 0.95)", q.completeness),
    );
    report.check(
        "integrity_events",
        q.integrity_events == 0,
        q.integrity_events.to_string(),
    );
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_names() {
        for p in [Profile::Endurance72h, Profile::Powercycle50, Profile::Shakedown] {
            assert_eq!(Profile::from_name(p.name()), Some(p));
        }
        assert_eq!(Profile::from_name("soak"), None);
    }

    #[test]
    fn single_power_cycle_recovers_exactly() {
        let mut rng = stream_rng(1, Stream::Harness);
        let o = power_cycle_once(&Config::reference(), 1, true, &mut rng);
        assert!(o.crashed);
        assert_eq!((o.lost, o.extra, o.duplicates), (0, 0, 0));
        assert_eq!(o.committed, o.recovered);
    }

    #[test]
    fn disabled_marker_loses_committed_records() {
        let mut rng = stream_rng(1, Stream::Harness);
        let o = power_cycle_once(&Config::reference(), 1, false, &mut rng);
        assert!(o.lost > 0);
    }
}
