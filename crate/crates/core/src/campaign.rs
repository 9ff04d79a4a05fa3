//! Tick-by-tick logger driver: runs the simulated world through the
//! controller, clock, storage and telemetry paths.

use std::io::Write;
use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;

use crate::acquisition::{Acquisition, TickStamp};
use crate::config::{Config, DiagnosticsLevel};
use crate::flags::QualityFlags;
use crate::model::{Record, Timestamp};
use crate::sim::{stream_rng, FaultSchedule, SimTick, Simulator, Stream};
use crate::statemachine::{transition, Action, DaqState, Event, Mode, Policy, TransitionLine};
use crate::storage::log::FlushError;
use crate::storage::{LogBufferPair, LogStore, Medium, MediumError, RamRing, RecoveryReport};
use crate::telemetry::{Broker, TelemetryQueue};
use crate::timekeeping::{ClockState, SyncOutcome};

/// How logical time relates to wall time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    /// As fast as possible.
    Max,
    /// Logical seconds per wall second. `Ratio(1.0)` is real time.
    Ratio(f64),
}

/// Counters reported at the end of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CampaignStats {
    pub ticks: u64,
    /// Ticks during which the logger was unpowered.
    pub unpowered_ticks: u64,
    /// Ticks skipped because real-time pacing fell more than one period behind.
    pub missed_ticks: u64,
    pub records_acquired: u64,
    pub records_committed: u64,
    /// Records held in RAM when power failed.
    pub lost_on_power_loss: u64,
    /// Records still in RAM at the end that could not be written.
    pub lost_at_shutdown: u64,
    pub ring_dropped: u64,
    pub buffer_overflow: u64,
    pub flushes: u64,
    pub write_errors: u64,
    pub buffer_only_entries: u64,
    pub remounts: u64,
    pub sensor_faults: u64,
    pub syncs: u64,
    pub sync_steps: u64,
    pub power_losses: u64,
    pub truncated_bytes: u64,
    pub integrity_events: u64,
    pub transitions: u64,
    pub telemetry_enqueued: u64,
    pub telemetry_sent: u64,
    pub telemetry_dropped: u64,
    /// Longest stretch of logical time without a successful sync.
    pub max_unsynced_s: f64,
}

impl CampaignStats {
    /// Stable `key=value` lines.
    pub fn summary_lines(&self) -> Vec<String> {
        vec![
            format!("ticks={}", self.ticks),
            format!("records_acquired={}", self.records_acquired),
            format!("records_logged={}", self.records_committed),
            format!("unpowered_ticks={}", self.unpowered_ticks),
            format!("missed_ticks={}", self.missed_ticks),
            format!("lost_on_power_loss={}", self.lost_on_power_loss),
            format!("lost_at_shutdown={}", self.lost_at_shutdown),
            format!("ring_dropped={}", self.ring_dropped),
            format!("buffer_overflow={}", self.buffer_overflow),
            format!("flushes={}", self.flushes),
            format!("write_errors={}", self.write_errors),
            format!("buffer_only_entries={}", self.buffer_only_entries),
            format!("remounts={}", self.remounts),
            format!("sensor_faults={}", self.sensor_faults),
            format!("syncs={}", self.syncs),
            format!("sync_steps={}", self.sync_steps),
            format!("power_losses={}", self.power_losses),
            format!("truncated_bytes={}", self.truncated_bytes),
            format!("integrity_events={}", self.integrity_events),
            format!("transitions={}", self.transitions),
            format!("telemetry_enqueued={}", self.telemetry_enqueued),
            format!("telemetry_sent={}", self.telemetry_sent),
            format!("telemetry_dropped={}", self.telemetry_dropped),
            format!("max_unsynced_s={:.1}", self.max_unsynced_s),
        ]
    }
}

fn is_fault_line(from: Mode, event: Event, to: Mode) -> bool {
    from.is_fault()
        || to.is_fault()
        || !matches!(
            event,
            Event::Tick | Event::SampleOk | Event::WriteOk | Event::NetUp
        )
}

type TruthHook = Box<dyn FnMut(&SimTick, &Record) + Send>;

pub struct Campaign<M: Medium> {
    config: Config,
    sim: Simulator,
    acq: Acquisition,
    clock: ClockState,
    state: DaqState,
    buffers: LogBufferPair,
    ring: RamRing<Record>,
    log: LogStore<M>,
    queue: TelemetryQueue,
    broker: Broker,
    telemetry_rng: ChaCha8Rng,
    diagnostics: Option<Box<dyn Write + Send>>,
    stats: CampaignStats,
    true_time_s: f64,
    last_sync_attempt_s: f64,
    last_sync_ok_s: f64,
    last_remount_s: f64,
    committed: Option<Vec<Timestamp>>,
    truth_hook: Option<TruthHook>,
}

impl<M: Medium> Campaign<M> {
    pub fn new(config: &Config, schedule: FaultSchedule, seed: u64, medium: M) -> Self {
        let dt = config.tick_s();
        let start = config.clock.campaign_start as f64;
        let clock = ClockState::new(start + config.clock.initial_offset_s, config.clock.drift_ppm)
            .with_step_threshold(config.clock.step_threshold_s);
        // Storage is recovered during boot; the handle starts unscanned.
        let log = LogStore::unscanned(medium);
        Self {
            sim: Simulator::new(config, schedule, seed),
            acq: Acquisition::new(config),
            clock,
            state: DaqState::new(Policy {
                telemetry_enabled: config.telemetry.enabled,
                sd_retry_max: config.sd_retry_max,
            }),
            buffers: LogBufferPair::new(config.buffer_capacity, config.flush_interval_s),
            ring: RamRing::new(config.ring_capacity),
            log,
            queue: TelemetryQueue::new(&config.telemetry),
            broker: Broker::new(),
            telemetry_rng: stream_rng(seed, Stream::Telemetry),
            diagnostics: None,
            stats: CampaignStats::default(),
            true_time_s: 0.0,
            last_sync_attempt_s: f64::NEG_INFINITY,
            last_sync_ok_s: 0.0,
            last_remount_s: 0.0,
            committed: None,
            truth_hook: None,
            config: {
                let mut c = config.clone();
                c.sample_rate_hz = (1.0 / dt).round() as u32;
                c
            },
        }
    }

    pub fn with_diagnostics(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.diagnostics = Some(sink);
        self
    }

    pub fn with_broker(mut self, broker: Broker) -> Self {
        self.broker = broker;
        self
    }

    /// Keeps the stamps of every committed record, for crash tests.
    pub fn track_committed(mut self) -> Self {
        self.committed = Some(Vec::new());
        self
    }

    /// Called with the ground truth and the record for every acquired tick.
    pub fn with_truth_hook(mut self, hook: impl FnMut(&SimTick, &Record) + Send + 'static) -> Self {
        self.truth_hook = Some(Box::new(hook));
        self
    }

    pub fn stats(&self) -> &CampaignStats {
        &self.stats
    }

    pub fn state(&self) -> &DaqState {
        &self.state
    }

    pub fn committed(&self) -> Option<&[Timestamp]> {
        self.committed.as_deref()
    }

    pub fn log(&self) -> &LogStore<M> {
        &self.log
    }

    pub fn log_mut(&mut self) -> &mut LogStore<M> {
        &mut self.log
    }

    pub fn medium_mut(&mut self) -> &mut M {
        self.log.medium_mut()
    }

    pub fn queue(&self) -> &TelemetryQueue {
        &self.queue
    }

    fn diag(&mut self, line: &str) {
        if let Some(d) = self.diagnostics.as_mut() {
            let _ = writeln!(d, "{line}");
        }
    }

    fn fire(&mut self, event: Event) -> Vec<Action> {
        let from = self.state.mode;
        let (next, actions) = transition(self.state, event);
        self.state = next;
        self.stats.transitions += 1;
        let show = match self.config.diagnostics {
            DiagnosticsLevel::Full => true,
            DiagnosticsLevel::Faults => is_fault_line(from, event, next.mode),
            DiagnosticsLevel::Off => false,
        };
        if show && self.diagnostics.is_some() {
            let line = TransitionLine {
                time_s: self.true_time_s,
                from,
                event,
                to: next.mode,
            };
            self.diag(&line.to_string());
        }
        actions
    }

    fn power_loss(&mut self) {
        self.fire(Event::PowerLoss);
        self.stats.power_losses += 1;
        self.stats.lost_on_power_loss += (self.buffers.len() + self.ring.len()) as u64;
        self.buffers.clear();
        self.ring.clear();
        self.queue.clear();
        self.acq = Acquisition::new(&self.config);
    }

    fn boot(&mut self, net_up: bool) {
        if self.state.mode == Mode::PowerLoss {
            self.fire(Event::PowerRestored);
        }
        // An unreadable card is retried on the first flush.
        if let Ok(report) = self.log.rescan() {
            self.absorb(report);
        }
        self.buffers.set_epoch(self.true_time_s);
        self.last_remount_s = self.true_time_s;
        self.fire(Event::BootOk);
        let ok = self.sync(net_up);
        self.fire(if ok { Event::SyncOk } else { Event::SyncFail });
    }

    fn absorb(&mut self, report: RecoveryReport) {
        self.stats.truncated_bytes += report.truncated_bytes;
        self.stats.integrity_events += report.integrity_events();
    }

    fn sync(&mut self, network_up: bool) -> bool {
        self.last_sync_attempt_s = self.true_time_s;
        let server = self.config.clock.campaign_start as f64 + self.true_time_s;
        match self.clock.ntp_sync(server, network_up) {
            SyncOutcome::Unavailable => false,
            outcome => {
                self.stats.syncs += 1;
                if matches!(outcome, SyncOutcome::Stepped { .. }) {
                    self.stats.sync_steps += 1;
                }
                self.last_sync_ok_s = self.true_time_s;
                true
            }
        }
    }

    fn record_committed(&mut self, records: &[Record]) {
        self.stats.records_committed += records.len() as u64;
        if let Some(c) = self.committed.as_mut() {
            c.extend(records.iter().map(|r| r.timestamp));
        }
    }

    /// Writes the pending batch, following the controller's retry policy.
    /// Returns false if power failed during the write.
    fn flush_with_retries(&mut self) -> bool {
        loop {
            self.buffers.swap();
            let batch = self.buffers.flushing().to_vec();
            match self.log.flush(&batch) {
                Ok(()) => {
                    self.record_committed(&batch);
                    self.buffers.flush_done(self.true_time_s);
                    self.stats.flushes += 1;
                    self.fire(Event::WriteOk);
                    return true;
                }
                Err(FlushError { committed, source }) => {
                    self.record_committed(&batch[..committed]);
                    self.buffers.flush_partial(committed);
                    if matches!(source, MediumError::PowerLost) {
                        self.power_loss();
                        return false;
                    }
                    self.stats.write_errors += 1;
                    let actions = self.fire(Event::WriteErr);
                    if actions.contains(&Action::EnterBufferOnly) {
                        self.stats.buffer_only_entries += 1;
                        self.last_remount_s = self.true_time_s;
                        for r in self.buffers.drain_all() {
                            self.ring.push(r);
                        }
                        return true;
                    }
                }
            }
        }
    }

    /// Tries to bring the medium back and write out the RAM ring.
    fn try_remount(&mut self) -> bool {
        self.last_remount_s = self.true_time_s;
        if !self.log.medium().available() {
            return true;
        }
        if self.log.rescan().map(|r| self.absorb(r)).is_err() {
            return true;
        }
        while !self.ring.is_empty() {
            let n = self.ring.len().min(self.config.buffer_capacity.max(1));
            let batch: Vec<Record> = self.ring.iter().take(n).cloned().collect();
            match self.log.flush(&batch) {
                Ok(()) => {
                    self.record_committed(&batch);
                    self.stats.flushes += 1;
                    for _ in 0..n {
                        self.ring.pop_front();
                    }
                }
                Err(FlushError { committed, source }) => {
                    self.record_committed(&batch[..committed]);
                    for _ in 0..committed {
                        self.ring.pop_front();
                    }
                    if matches!(source, MediumError::PowerLost) {
                        self.power_loss();
                        return false;
                    }
                    return true;
                }
            }
        }
        self.stats.remounts += 1;
        self.state = self.state.remounted();
        self.buffers.set_epoch(self.true_time_s);
        self.diag(&format!("{:.2} REMOUNT ok", self.true_time_s));
        true
    }

    /// Advances one tick. `skip` drops the acquisition for this tick while
    /// the world and the clock still move.
    pub fn step(&mut self, skip: bool) {
        let tick = self.sim.step();
        let dt_true = tick.time_s - self.true_time_s;
        self.true_time_s = tick.time_s;
        self.clock.rtc_advance(dt_true);
        self.stats.ticks += 1;
        self.log.medium_mut().set_available(!tick.faults.sd_fail);

        if tick.faults.power_outage {
            if self.state.mode != Mode::PowerLoss {
                self.power_loss();
            }
            self.stats.unpowered_ticks += 1;
            return;
        }
        let net_up = !tick.faults.net_outage;
        if matches!(self.state.mode, Mode::PowerLoss | Mode::Init) {
            self.boot(net_up);
        }
        if self.true_time_s - self.last_sync_attempt_s >= self.config.clock.sync_interval_s {
            self.sync(net_up);
        }
        let since = self.true_time_s - self.last_sync_ok_s;
        if since > self.stats.max_unsynced_s {
            self.stats.max_unsynced_s = since;
        }
        if skip {
            self.stats.missed_ticks += 1;
            return;
        }

        self.fire(Event::Tick);
        let counter = self.acq.counter();
        for _ in 0..tick.frame.pulses {
            counter.isr_on_pulse();
        }
        let stamp = TickStamp {
            timestamp: self.clock.stamp(),
            synced: self.clock.synced(),
        };
        let record = self.acq.acquire_tick(&tick.frame, stamp);
        self.stats.records_acquired += 1;
        if let Some(hook) = self.truth_hook.as_mut() {
            hook(&tick, &record);
        }
        let sensor_fault = record.flags.contains(QualityFlags::SENSOR_FAULT);
        if sensor_fault {
            self.stats.sensor_faults += 1;
        }
        self.fire(if sensor_fault { Event::SensorErr } else { Event::SampleOk });

        if self.config.telemetry.enabled {
            self.queue.enqueue(&record);
            self.stats.telemetry_enqueued += 1;
        }
        if self.state.buffer_only {
            self.ring.push(record);
            self.fire(Event::WriteOk);
            if self.true_time_s - self.last_remount_s >= self.config.remount_interval_s
                && !self.try_remount()
            {
                return;
            }
        } else {
            self.buffers.append(record);
            if self.buffers.flush_due(self.true_time_s) {
                if !self.flush_with_retries() {
                    return;
                }
            } else {
                self.fire(Event::WriteOk);
            }
        }

        if self.state.mode == Mode::Transmit {
            self.stats.telemetry_sent +=
                self.queue
                    .try_transmit(net_up, self.true_time_s, &mut self.broker, &mut self.telemetry_rng)
                    as u64;
            self.fire(if net_up { Event::NetUp } else { Event::NetDown });
        }
        self.stats.ring_dropped = self.ring.dropped();
        self.stats.buffer_overflow = self.buffers.overflow();
        self.stats.telemetry_dropped = self.queue.dropped();
    }

    /// Runs `duration_s` of logical time and shuts down cleanly.
    pub fn run(&mut self, duration_s: f64, pacing: Pacing) -> &CampaignStats {
        let dt = self.sim.dt();
        let ticks = (duration_s / dt).round() as u64;
        let wall_start = Instant::now();
        for k in 0..ticks {
            let mut skip = false;
            if let Pacing::Ratio(ratio) = pacing {
                let period = dt / ratio;
                let due = wall_start + Duration::from_secs_f64(k as f64 * period);
                let now = Instant::now();
                if now < due {
                    std::thread::sleep(due - now);
                } else if (now - due).as_secs_f64() > period {
                    skip = true;
                }
            }
            self.step(skip);
        }
        self.shutdown();
        &self.stats
    }

    /// Writes everything still in RAM if the medium allows it.
    pub fn shutdown(&mut self) {
        if self.state.mode != Mode::PowerLoss && self.log.medium().available() {
            if self.state.buffer_only {
                self.try_remount();
            }
            if !self.state.buffer_only && !self.buffers.is_empty() {
                self.buffers.swap();
                let batch = self.buffers.flushing().to_vec();
                match self.log.flush(&batch) {
                    Ok(()) => {
                        self.record_committed(&batch);
                        self.buffers.flush_done(self.true_time_s);
                        self.stats.flushes += 1;
                    }
                    Err(e) => self.record_committed(&batch[..e.committed]),
                }
            }
        }
        self.stats.lost_at_shutdown = (self.buffers.len() + self.ring.len()) as u64;
        self.stats.ring_dropped = self.ring.dropped();
        self.stats.buffer_overflow = self.buffers.overflow();
        self.stats.telemetry_dropped = self.queue.dropped();
        self.broker.finish();
        if let Some(d) = self.diagnostics.as_mut() {
            let _ = d.flush();
        }
    }
}
