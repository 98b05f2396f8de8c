//! The five-point misogyny scale.

use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of classes on the label scale (0 through 4).
pub const NUM_CLASSES: usize = 5;

/// A label outside `0..=4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("label {0} is outside the valid range 0..=4")]
pub struct InvalidLabel(pub i64);

/// Severity of misogyny as perceived by one annotator.
///
/// `0` means absent; `1..=4` are mild, present, strong and extreme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct Label(u8);

impl Label {
    pub const ABSENT: Label = Label(0);
    pub const MAX: Label = Label(4);
    pub const ALL: [Label; NUM_CLASSES] = [Label(0), Label(1), Label(2), Label(3), Label(4)];

    pub fn new(value: i64) -> Result<Self, InvalidLabel> {
        if (0..NUM_CLASSES as i64).contains(&value) {
            Ok(Label(value as u8))
        } else {
            Err(InvalidLabel(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// `0` for absence, `1` for any severity.
    pub fn binarize(self) -> u8 {
        binarize(self)
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// English caption shown next to the value in annotation tools.
    pub fn caption(self) -> &'static str {
        match self.0 {
            0 => "none",
            1 => "mild",
            2 => "present",
            3 => "strong",
            _ => "extreme",
        }
    }
}

/// Collapses the scale into presence (`1`) or absence (`0`).
pub fn binarize(label: Label) -> u8 {
    u8::from(label.0 > 0)
}

impl TryFrom<i64> for Label {
    type Error = InvalidLabel;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        Label::new(value)
    }
}

impl From<Label> for u8 {
    fn from(label: Label) -> u8 {
        label.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Whether statistics run on the full five-point scale or on the binarized one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Full,
    Binary,
}

impl Scale {
    pub fn from_binarized(binarized: bool) -> Self {
        if binarized {
            Scale::Binary
        } else {
            Scale::Full
        }
    }

    pub fn num_classes(self) -> usize {
        match self {
            Scale::Full => NUM_CLASSES,
            Scale::Binary => 2,
        }
    }

    /// Class index of `label` on this scale.
    pub fn class_of(self, label: Label) -> usize {
        match self {
            Scale::Full => label.index(),
            Scale::Binary => binarize(label) as usize,
        }
    }
}
