//! Operational-state labels: one normal class plus one open-circuit fault
//! class per (inverter, switch) pair.

use std::fmt;

use crate::error::{Error, Result};

pub const NUM_INVERTERS: usize = 4;
pub const SWITCHES_PER_INVERTER: usize = 6;
pub const NUM_CLASSES: usize = 1 + NUM_INVERTERS * SWITCHES_PER_INVERTER;

/// A class id in `0..25`. Class 0 is normal operation; fault classes are
/// `(inverter - 1) * 6 + switch` with 1-based inverter and switch indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassLabel(u8);

impl ClassLabel {
    pub const NORMAL: ClassLabel = ClassLabel(0);

    pub fn from_id(class_id: usize) -> Result<Self> {
        if class_id < NUM_CLASSES {
            Ok(ClassLabel(class_id as u8))
        } else {
            Err(Error::domain(format!("class id {class_id} out of range")))
        }
    }

    pub fn fault(inverter: usize, switch: usize) -> Result<Self> {
        encode_label(inverter, switch).map(ClassLabel)
    }

    pub fn id(self) -> usize {
        self.0 as usize
    }

    pub fn is_normal(self) -> bool {
        self.0 == 0
    }

    /// 1-based inverter, or `None` for normal operation.
    pub fn inverter(self) -> Option<usize> {
        decode_label(self.id()).ok().map(|(i, _)| i)
    }

    /// 1-based switch, or `None` for normal operation.
    pub fn switch(self) -> Option<usize> {
        decode_label(self.id()).ok().map(|(_, s)| s)
    }

    /// Stage-1 target: 0 for normal, otherwise the 1-based inverter.
    pub fn stage1_target(self) -> usize {
        self.inverter().unwrap_or(0)
    }

    /// Stage-2 target: 0-based switch index within the inverter.
    pub fn stage2_target(self) -> Option<usize> {
        self.switch().map(|s| s - 1)
    }

    pub fn all() -> impl Iterator<Item = ClassLabel> {
        (0..NUM_CLASSES as u8).map(ClassLabel)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.inverter(), self.switch()) {
            (Some(i), Some(s)) => write!(f, "Inv {i}, Switch S{s}"),
            _ => write!(f, "Normal"),
        }
    }
}

pub fn encode_label(inverter: usize, switch: usize) -> Result<u8> {
    if !(1..=NUM_INVERTERS).contains(&inverter) || !(1..=SWITCHES_PER_INVERTER).contains(&switch) {
        return Err(Error::domain(format!(
            "no fault class for inverter {inverter}, switch {switch}"
        )));
    }
    Ok(((inverter - 1) * SWITCHES_PER_INVERTER + switch) as u8)
}

/// Inverse of [`encode_label`]. Class 0 (normal) has no decoding.
pub fn decode_label(class_id: usize) -> Result<(usize, usize)> {
    if class_id == 0 || class_id >= NUM_CLASSES {
        return Err(Error::domain(format!("class id {class_id} is not a fault class")));
    }
    let k = class_id - 1;
    Ok((k / SWITCHES_PER_INVERTER + 1, k % SWITCHES_PER_INVERTER + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_examples() {
        assert_eq!(encode_label(1, 1).unwrap(), 1);
        assert_eq!(encode_label(4, 6).unwrap(), 24);
        assert_eq!(decode_label(17).unwrap(), (3, 5));
        assert!(encode_label(0, 1).is_err());
        assert!(encode_label(5, 1).is_err());
        assert!(encode_label(1, 7).is_err());
        assert!(decode_label(0).is_err());
        assert!(decode_label(25).is_err());
    }

    #[test]
    fn bijection() {
        for label in ClassLabel::all() {
            match (label.inverter(), label.switch()) {
                (Some(i), Some(s)) => assert_eq!(ClassLabel::fault(i, s).unwrap(), label),
                (None, None) => assert!(label.is_normal()),
                _ => panic!("half-decoded label {label:?}"),
            }
        }
        assert_eq!(ClassLabel::from_id(17).unwrap().to_string(), "Inv 3, Switch S5");
    }
}
