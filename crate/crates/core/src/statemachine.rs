//! Fault-aware acquisition controller.
//!
//! Normal cycle: INIT → TIME_SYNC → ACQUIRE → LOG → TRANSMIT → ACQUIRE.
//! Sensor errors flag the record and continue, SD write errors are retried
//! a bounded number of times before the logger degrades to RAM-only
//! buffering, and network errors only ever affect the telemetry queue.
//!
//! [`transition`] is total: any (mode, event) pair not in the table is a
//! no-op that returns the state unchanged and no actions.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Init,
    TimeSync,
    Acquire,
    Log,
    Transmit,
    FaultSensor,
    FaultSd,
    FaultNet,
    /// Unpowered; only `PowerRestored` leaves this mode.
    PowerLoss,
}

impl Mode {
    pub const ALL: [Mode; 9] = [
        Mode::Init,
        Mode::TimeSync,
        Mode::Acquire,
        Mode::Log,
        Mode::Transmit,
        Mode::FaultSensor,
        Mode::FaultSd,
        Mode::FaultNet,
        Mode::PowerLoss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Init => "INIT",
            Mode::TimeSync => "TIME_SYNC",
            Mode::Acquire => "ACQUIRE",
            Mode::Log => "LOG",
            Mode::Transmit => "TRANSMIT",
            Mode::FaultSensor => "FAULT_SENSOR",
            Mode::FaultSd => "FAULT_SD",
            Mode::FaultNet => "FAULT_NET",
            Mode::PowerLoss => "POWER_LOSS",
        }
    }

    pub fn is_fault(self) -> bool {
        matches!(
            self,
            Mode::FaultSensor | Mode::FaultSd | Mode::FaultNet | Mode::PowerLoss
        )
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    BootOk,
    SyncOk,
    SyncFail,
    Tick,
    SampleOk,
    SensorErr,
    WriteOk,
    WriteErr,
    NetUp,
    NetDown,
    PowerLoss,
    PowerRestored,
}

impl Event {
    pub const ALL: [Event; 12] = [
        Event::BootOk,
        Event::SyncOk,
        Event::SyncFail,
        Event::Tick,
        Event::SampleOk,
        Event::SensorErr,
        Event::WriteOk,
        Event::WriteErr,
        Event::NetUp,
        Event::NetDown,
        Event::PowerLoss,
        Event::PowerRestored,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Event::BootOk => "BOOT_OK",
            Event::SyncOk => "SYNC_OK",
            Event::SyncFail => "SYNC_FAIL",
            Event::Tick => "TICK",
            Event::SampleOk => "SAMPLE_OK",
            Event::SensorErr => "SENSOR_ERR",
            Event::WriteOk => "WRITE_OK",
            Event::WriteErr => "WRITE_ERR",
            Event::NetUp => "NET_UP",
            Event::NetDown => "NET_DOWN",
            Event::PowerLoss => "POWER_LOSS",
            Event::PowerRestored => "POWER_RESTORED",
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Side effects the driver must carry out after a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    /// Recover the log from the medium before booting.
    RecoverStorage,
    AttemptTimeSync,
    /// Continue on the RTC; records carry `CLOCK_UNSYNCED` until a sync.
    UseRtcFallback,
    Sample,
    /// Mark the pending record `SENSOR_FAULT`.
    FlagSensorFault,
    /// Hand the pending record to the storage path.
    LogRecord,
    RetryWrite,
    /// Stop writing to the medium; hold records in the RAM ring and
    /// attempt periodic remounts.
    EnterBufferOnly,
    Transmit,
    /// Leave the record queued; schedule a backoff retry.
    QueueForRetry,
    /// Volatile state (buffers, queue, filters) is gone.
    DropVolatile,
    /// The machine passed through this mode on the way to the result.
    Passed(Mode),
}

/// Policy knobs the transition table depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Policy {
    pub telemetry_enabled: bool,
    pub sd_retry_max: u32,
}

impl Default for Policy {
    fn default() -> Self {
        Self {
            telemetry_enabled: true,
            sd_retry_max: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DaqState {
    pub mode: Mode,
    pub policy: Policy,
    pub sd_retries: u32,
    pub net_failures: u32,
    /// Writing to the medium is suspended.
    pub buffer_only: bool,
}

impl DaqState {
    pub fn new(policy: Policy) -> Self {
        Self {
            mode: Mode::Init,
            policy,
            sd_retries: 0,
            net_failures: 0,
            buffer_only: false,
        }
    }

    fn to(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    /// The medium came back after a successful remount and the RAM ring
    /// has been written out.
    pub fn remounted(mut self) -> Self {
        self.buffer_only = false;
        self.sd_retries = 0;
        self
    }

    fn after_log(self) -> (Mode, Action) {
        if self.policy.telemetry_enabled {
            (Mode::Transmit, Action::Transmit)
        } else {
            (Mode::Acquire, Action::Sample)
        }
    }
}

/// Applies one event. Returns the new state and the driver's actions.
pub fn transition(state: DaqState, event: Event) -> (DaqState, Vec<Action>) {
    use Action as A;
    use Event as E;
    use Mode as M;

    if event == E::PowerLoss && state.mode != M::PowerLoss {
        let mut s = state.to(M::PowerLoss);
        s.sd_retries = 0;
        s.buffer_only = false;
        return (s, vec![A::DropVolatile]);
    }

    match (state.mode, event) {
        (M::PowerLoss, E::PowerRestored) => (state.to(M::Init), vec![A::RecoverStorage]),
        (M::Init, E::BootOk) => (state.to(M::TimeSync), vec![A::AttemptTimeSync]),
        (M::TimeSync, E::SyncOk) => (state.to(M::Acquire), vec![A::Sample]),
        (M::TimeSync, E::SyncFail) => (state.to(M::Acquire), vec![A::UseRtcFallback, A::Sample]),
        (M::Acquire, E::Tick) => (state, vec![A::Sample]),
        (M::Acquire, E::SampleOk) => (state.to(M::Log), vec![A::LogRecord]),
        (M::Acquire, E::SensorErr) => (
            state.to(M::Log),
            vec![A::Passed(M::FaultSensor), A::FlagSensorFault, A::LogRecord],
        ),
        (M::FaultSensor, _) => (state.to(M::Log), vec![A::FlagSensorFault, A::LogRecord]),
        (M::Log | M::FaultSd, E::WriteOk) => {
            let mut s = state;
            s.sd_retries = 0;
            let (mode, action) = s.after_log();
            (s.to(mode), vec![action])
        }
        (M::Log, E::WriteErr) => {
            let mut s = state.to(M::FaultSd);
            s.sd_retries = 0;
            (s, vec![A::RetryWrite])
        }
        (M::FaultSd, E::WriteErr) => {
            let mut s = state;
            s.sd_retries += 1;
            if s.sd_retries < s.policy.sd_retry_max {
                (s, vec![A::RetryWrite])
            } else {
                s.buffer_only = true;
                s.sd_retries = 0;
                let (mode, action) = s.after_log();
                (s.to(mode), vec![A::EnterBufferOnly, action])
            }
        }
        (M::Transmit, E::NetUp) => {
            let mut s = state;
            s.net_failures = 0;
            (s.to(M::Acquire), vec![A::Sample])
        }
        (M::Transmit, E::NetDown) => {
            let mut s = state;
            s.net_failures += 1;
            (
                s.to(M::Acquire),
                vec![A::Passed(M::FaultNet), A::QueueForRetry, A::Sample],
            )
        }
        (M::FaultNet, E::NetUp | E::NetDown | E::Tick) => (state.to(M::Acquire), vec![A::Sample]),
        _ => (state, Vec::new()),
    }
}

/// One diagnostics line: `time from event to`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionLine {
    pub time_s: f64,
    pub from: Mode,
    pub event: Event,
    pub to: Mode,
}

impl fmt::Display for TransitionLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} {} {} {}", self.time_s, self.from, self.event, self.to)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(mode: Mode) -> DaqState {
        DaqState::new(Policy::default()).to(mode)
    }

    #[test]
    fn transition_is_total() {
        for mode in Mode::ALL {
            for event in Event::ALL {
                let (s, _) = transition(at(mode), event);
                assert!(Mode::ALL.contains(&s.mode));
            }
        }
    }

    #[test]
    fn normal_cycle() {
        let s = DaqState::new(Policy::default());
        let (s, a) = transition(s, Event::BootOk);
        assert_eq!((s.mode, a), (Mode::TimeSync, vec![Action::AttemptTimeSync]));
        let (s, _) = transition(s, Event::SyncOk);
        assert_eq!(s.mode, Mode::Acquire);
        let (s, _) = transition(s, Event::SampleOk);
        assert_eq!(s.mode, Mode::Log);
        let (s, a) = transition(s, Event::WriteOk);
        assert_eq!((s.mode, a), (Mode::Transmit, vec![Action::Transmit]));
        let (s, _) = transition(s, Event::NetUp);
        assert_eq!(s.mode, Mode::Acquire);
    }

    #[test]
    fn log_skips_transmit_when_telemetry_disabled() {
        let mut s = at(Mode::Log);
        s.policy.telemetry_enabled = false;
        let (s, a) = transition(s, Event::WriteOk);
        assert_eq!((s.mode, a), (Mode::Acquire, vec![Action::Sample]));
    }

    #[test]
    fn sync_failure_falls_back_to_rtc() {
        let (s, a) = transition(at(Mode::TimeSync), Event::SyncFail);
        assert_eq!(s.mode, Mode::Acquire);
        assert!(a.contains(&Action::UseRtcFallback));
    }

    #[test]
    fn sensor_error_flags_and_continues() {
        let (s, a) = transition(at(Mode::Acquire), Event::SensorErr);
        assert_eq!(s.mode, Mode::Log);
        assert_eq!(
            a,
            vec![Action::Passed(Mode::FaultSensor), Action::FlagSensorFault, Action::LogRecord]
        );
    }

    #[test]
    fn write_errors_retry_then_degrade() {
        let (mut s, a) = transition(at(Mode::Log), Event::WriteErr);
        assert_eq!((s.mode, a), (Mode::FaultSd, vec![Action::RetryWrite]));
        for retry in 1..=2 {
            let (next, a) = transition(s, Event::WriteErr);
            s = next;
            assert_eq!(s.sd_retries, retry);
            assert_eq!(a, vec![Action::RetryWrite]);
            assert!(!s.buffer_only);
        }
        // Fourth error overall: the third retry failed.
        let (s, a) = transition(s, Event::WriteErr);
        assert!(s.buffer_only);
        assert!(a.contains(&Action::EnterBufferOnly));
        assert_eq!(s.mode, Mode::Transmit);
        assert_eq!(s.sd_retries, 0);
    }

    #[test]
    fn retry_recovers_on_success() {
        let (s, _) = transition(at(Mode::Log), Event::WriteErr);
        let (s, _) = transition(s, Event::WriteErr);
        let (s, _) = transition(s, Event::WriteOk);
        assert_eq!(s.mode, Mode::Transmit);
        assert_eq!(s.sd_retries, 0);
        assert!(!s.buffer_only);
    }

    #[test]
    fn network_down_queues_and_returns_to_acquire() {
        let (s, a) = transition(at(Mode::Transmit), Event::NetDown);
        assert_eq!(s.mode, Mode::Acquire);
        assert_eq!(
            a,
            vec![Action::Passed(Mode::FaultNet), Action::QueueForRetry, Action::Sample]
        );
        assert!(!a.contains(&Action::LogRecord));
    }

    #[test]
    fn power_loss_from_anywhere_until_restored() {
        for mode in Mode::ALL {
            if mode == Mode::PowerLoss {
                continue;
            }
            let (s, a) = transition(at(mode), Event::PowerLoss);
            assert_eq!((s.mode, a), (Mode::PowerLoss, vec![Action::DropVolatile]));
            for event in Event::ALL {
                if event == Event::PowerRestored {
                    continue;
                }
                let (still, a) = transition(s, event);
                assert_eq!(still.mode, Mode::PowerLoss, "{event}");
                assert!(a.is_empty());
            }
            let (s, a) = transition(s, Event::PowerRestored);
            assert_eq!((s.mode, a), (Mode::Init, vec![Action::RecoverStorage]));
        }
    }

    #[test]
    fn unlisted_pairs_are_noops() {
        let s = at(Mode::Acquire);
        let (same, a) = transition(s, Event::BootOk);
        assert_eq!(same, s);
        assert!(a.is_empty());
    }

    #[test]
    fn diagnostics_line_format() {
        let line = TransitionLine {
            time_s: 12.5,
            from: Mode::Log,
            event: Event::WriteErr,
            to: Mode::FaultSd,
        };
        assert_eq!(line.to_string(), "12.50 LOG WRITE_ERR FAULT_SD");
    }
}
