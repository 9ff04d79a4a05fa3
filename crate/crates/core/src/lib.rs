//! Wind-turbine data-acquisition simulator and reference logger.

pub mod config;
pub mod flags;
pub mod model;
pub mod sim;
pub mod acquisition;
pub mod timekeeping;
pub mod statemachine;
pub mod storage;
pub mod telemetry;
pub mod campaign;
pub mod pipeline;
pub mod benchtest;

/// Version string recorded in run manifests and dataset metadata.
pub const FIRMWARE_VERSION: &str = env!("CARGO_PKG_VERSION");
