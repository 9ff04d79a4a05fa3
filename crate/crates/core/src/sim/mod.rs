//! Deterministic, seeded ground truth for campaigns.
//!
//! Each concern draws from its own ChaCha stream derived from the
//! campaign seed, and every stream is consumed identically on every
//! tick, so the truth and sensor sequences never depend on what the
//! logger does with them.

pub mod env;
pub mod faults;
pub mod sensor;
pub mod turbine;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::model::{Channel, SensorSpec};

pub use env::{EnvState, WindModel};
pub use faults::{faults_active, ActiveFaults, FaultInterval, FaultKind, FaultSchedule, ScheduleError};
pub use sensor::{hall_pulse_count, quantize, sensor_read, HallSensor};
pub use turbine::{available_power, CpCurve, TurbineModel, TurbineTruth, RHO_STD};

/// Independent random streams of one campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Environment = 1,
    SensorNoise = 2,
    Glitch = 3,
    Telemetry = 4,
    Harness = 5,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Corruption injected between the sensor and the acquisition code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Glitch {
    /// Wind reading replaced with an implausibly high value.
    WindHigh(f64),
    /// Wind reading replaced with a negative value.
    WindNegative(f64),
    /// Electrical noise on the Hall line adds spurious pulses.
    RpmBurst(u64),
    /// The channel does not answer this tick.
    ReadFailure(Channel),
}

/// What the logger's drivers see on one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorFrame {
    /// `None` marks a failed read.
    pub readings: [Option<f64>; 6],
    /// Hall pulses that arrived during the tick.
    pub pulses: u64,
}

impl SensorFrame {
    pub fn get(&self, channel: Channel) -> Option<f64> {
        self.readings[channel.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimTick {
    pub index: u64,
    /// Logical seconds since campaign start, at the middle of the tick slot.
    pub time_s: f64,
    pub faults: ActiveFaults,
    pub env: EnvState,
    pub truth: TurbineTruth,
    pub frame: SensorFrame,
    pub glitch: Option<Glitch>,
}

pub struct Simulator {
    model: WindModel,
    turbine: TurbineModel,
    sensors: [SensorSpec; 6],
    pulses_per_rev: u32,
    load_resistance_ohm: f64,
    injection_rate: f64,
    schedule: FaultSchedule,
    dt: f64,
    env: EnvState,
    hall: HallSensor,
    previous: [Option<f64>; 6],
    env_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    glitch_rng: ChaCha8Rng,
    index: u64,
}

impl Simulator {
    pub fn new(config: &Config, schedule: FaultSchedule, seed: u64) -> Self {
        let dt = config.tick_s();
        let model = WindModel::from_config(&config.sim, config.clock.campaign_start);
        let mut env = model.initial();
        env.sim_time_s = -0.5 * dt;
        let turbine = TurbineModel::new(
            config.geometry,
            CpCurve::new(config.sim.cp_curve.clone()),
            config.sim.rotor_time_constant_s,
        )
        .spun_up(model.mean_mps);
        Self {
            model,
            turbine,
            sensors: config.sensors,
            pulses_per_rev: config.geometry.pulses_per_revolution,
            load_resistance_ohm: config.sim.load_resistance_ohm,
            injection_rate: config.sim.invalid_injection_rate,
            schedule,
            dt,
            env,
            hall: HallSensor::new(),
            previous: [None; 6],
            env_rng: stream_rng(seed, Stream::Environment),
            noise_rng: stream_rng(seed, Stream::SensorNoise),
            glitch_rng: stream_rng(seed, Stream::Glitch),
            index: 0,
        }
    }

    pub fn schedule(&self) -> &FaultSchedule {
        &self.schedule
    }

    pub fn turbine(&self) -> &TurbineModel {
        &self.turbine
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances the world by one tick.
    pub fn step(&mut self) -> SimTick {
        let dt = self.dt;
        self.env = self.model.step(&self.env, dt, &mut self.env_rng);
        let truth = self.turbine.respond(&self.env, dt);
        let mut pulses = self.hall.pulses(truth.omega_rad_s, dt, self.pulses_per_rev);
        let faults = self.schedule.faults_active(self.env.sim_time_s);

        let p = truth.power_w.max(0.0);
        let truths = [
            self.env.true_wind_mps,
            (p * self.load_resistance_ohm).sqrt(),
            (p / self.load_resistance_ohm).sqrt(),
            self.env.true_temp_c,
            self.env.true_pressure_pa,
            self.env.true_humidity_pct,
        ];
        let mut readings = [None; 6];
        for channel in Channel::ALL {
            let i = channel.index();
            let value = sensor_read(
                truths[i],
                &self.sensors[i],
                &mut self.noise_rng,
                faults.stuck(channel),
                self.previous[i],
            );
            self.previous[i] = Some(value);
            readings[i] = Some(value);
        }

        // Fixed number of draws per tick keeps the stream aligned.
        let roll: f64 = self.glitch_rng.gen();
        let which: u32 = self.glitch_rng.gen_range(0..4);
        let magnitude: f64 = self.glitch_rng.gen();
        let channel = Channel::ALL[self.glitch_rng.gen_range(0..Channel::ALL.len())];
        let glitch = (roll < self.injection_rate).then(|| match which {
            0 => Glitch::WindHigh(26.0 + 19.0 * magnitude),
            1 => Glitch::WindNegative(-(0.5 + 4.5 * magnitude)),
            2 => {
                let rpm = 550.0 + 350.0 * magnitude;
                Glitch::RpmBurst((rpm * self.pulses_per_rev as f64 * dt / 60.0).ceil() as u64)
            }
            _ => Glitch::ReadFailure(channel),
        });
        match glitch {
            Some(Glitch::WindHigh(v) | Glitch::WindNegative(v)) => readings[Channel::Wind.index()] = Some(v),
            Some(Glitch::RpmBurst(extra)) => pulses += extra,
            Some(Glitch::ReadFailure(c)) => readings[c.index()] = None,
            None => {}
        }

        let tick = SimTick {
            index: self.index,
            time_s: self.env.sim_time_s,
            faults,
            env: self.env,
            truth,
            frame: SensorFrame { readings, pulses },
            glitch,
        };
        self.index += 1;
        tick
    }
}
