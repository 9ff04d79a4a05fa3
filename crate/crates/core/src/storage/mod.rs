//! Crash-safe local log.

pub mod buffer;
pub mod csv;
pub mod log;
pub mod medium;

pub use buffer::{LogBufferPair, RamRing};
pub use csv::{parse_record, serialize_record, RowError, COLUMNS, HEADER};
pub use log::{recover, verify, IntegrityReport, LogStore, RecoveryReport};
pub use medium::{DirMedium, Medium, MediumError, MemMedium};
