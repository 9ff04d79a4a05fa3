//! Record quality flags.
//!
//! Flags annotate a record; they never cause it to be dropped at
//! acquisition time. Bit positions are part of the CSV wire format and
//! must not be renumbered.

use std::collections::BTreeSet;
use std::fmt;

use bitflags::bitflags;
use thiserror::Error;

bitflags! {
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
    pub struct QualityFlags: u16 {
        const RANGE_WIND = 1 << 0;
        const RANGE_RPM = 1 << 1;
        const REVERSE_CURRENT = 1 << 2;
        const SENSOR_FAULT = 1 << 3;
        const DUP_TIMESTAMP = 1 << 4;
        const OUT_OF_SEQUENCE = 1 << 5;
        const BELOW_CUTIN = 1 << 6;
        const BETZ_EXCEEDED = 1 << 7;
        const CLOCK_UNSYNCED = 1 << 8;
    }
}

/// Vocabulary in bit order.
pub const FLAG_NAMES: [&str; 9] = [
    "RANGE_WIND",
    "RANGE_RPM",
    "REVERSE_CURRENT",
    "SENSOR_FAULT",
    "DUP_TIMESTAMP",
    "OUT_OF_SEQUENCE",
    "BELOW_CUTIN",
    "BETZ_EXCEEDED",
    "CLOCK_UNSYNCED",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlagError {
    #[error("unknown flag name `{0}`")]
    UnknownName(String),
    #[error("bitmask {0:#x} uses undefined bits")]
    UndefinedBits(u16),
}

impl QualityFlags {
    /// Flags that make a sample invalid for the validity dimension.
    pub const INVALID: QualityFlags = QualityFlags::RANGE_WIND
        .union(QualityFlags::RANGE_RPM)
        .union(QualityFlags::SENSOR_FAULT);

    /// Flags that exclude a record from curve fitting.
    pub const CURVE_EXCLUDED: QualityFlags = QualityFlags::INVALID
        .union(QualityFlags::DUP_TIMESTAMP)
        .union(QualityFlags::OUT_OF_SEQUENCE)
        .union(QualityFlags::BELOW_CUTIN);

    pub fn parse_name(name: &str) -> Result<Self, FlagError> {
        FLAG_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|bit| QualityFlags::from_bits_retain(1 << bit))
            .ok_or_else(|| FlagError::UnknownName(name.to_string()))
    }

    /// Strict conversion from a decoded integer column.
    pub fn from_mask(mask: u16) -> Result<Self, FlagError> {
        QualityFlags::from_bits(mask).ok_or(FlagError::UndefinedBits(mask))
    }
}

impl fmt::Display for QualityFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = flags_decode(self.bits()).unwrap_or_default();
        if names.is_empty() {
            return f.write_str("-");
        }
        let joined: Vec<&str> = names.into_iter().collect();
        f.write_str(&joined.join("|"))
    }
}

/// Encodes a set of flag names into the 9-bit mask.
pub fn flags_encode<'a, I>(names: I) -> Result<u16, FlagError>
where
    I: IntoIterator<Item = &'a str>,
{
    names.into_iter().try_fold(0u16, |mask, name| {
        QualityFlags::parse_name(name).map(|f| mask | f.bits())
    })
}

/// Decodes a mask into the set of flag names it carries.
pub fn flags_decode(mask: u16) -> Result<BTreeSet<&'static str>, FlagError> {
    let flags = QualityFlags::from_mask(mask)?;
    Ok(FLAG_NAMES
        .iter()
        .enumerate()
        .filter(|(bit, _)| flags.bits() & (1 << bit) != 0)
        .map(|(_, name)| *name)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_set_is_zero() {
        assert_eq!(flags_encode([]).unwrap(), 0);
        assert!(flags_decode(0).unwrap().is_empty());
    }

    #[test]
    fn single_bit_assignment() {
        assert_eq!(flags_encode(["RANGE_WIND"]).unwrap(), 1);
        assert_eq!(flags_encode(["CLOCK_UNSYNCED"]).unwrap(), 1 << 8);
        assert_eq!(
            QualityFlags::parse_name("BETZ_EXCEEDED").unwrap(),
            QualityFlags::BETZ_EXCEEDED
        );
    }

    #[test]
    fn names_match_bit_constants() {
        for (bit, name) in FLAG_NAMES.iter().enumerate() {
            let named = QualityFlags::all()
                .iter_names()
                .find(|(n, _)| n == name)
                .map(|(_, f)| f)
                .unwrap();
            assert_eq!(named.bits(), 1 << bit, "{name}");
        }
    }

    #[test]
    fn exhaustive_round_trip_over_all_masks() {
        for mask in 0u16..512 {
            let names = flags_decode(mask).unwrap();
            assert_eq!(flags_encode(names.iter().copied()).unwrap(), mask);
            // Subset enumeration oracle: names present iff bit set.
            for (bit, name) in FLAG_NAMES.iter().enumerate() {
                assert_eq!(names.contains(name), mask & (1 << bit) != 0);
            }
        }
    }

    #[test]
    fn unknown_name_and_undefined_bits_rejected() {
        assert_eq!(
            flags_encode(["RANGE_WIND", "GREMLINS"]),
            Err(FlagError::UnknownName("GREMLINS".into()))
        );
        assert_eq!(flags_decode(512), Err(FlagError::UndefinedBits(512)));
    }

    #[test]
    fn display_lists_names() {
        let f = QualityFlags::RANGE_WIND | QualityFlags::SENSOR_FAULT;
        assert_eq!(f.to_string(), "RANGE_WIND|SENSOR_FAULT");
        assert_eq!(QualityFlags::empty().to_string(), "-");
    }
}
