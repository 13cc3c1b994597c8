use serde::{Deserialize, Serialize};
use std::fmt;

/// Return-sign class. Zero returns count as `Up`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "-1")]
    Down,
    #[serde(rename = "1")]
    Up,
}

impl Label {
    pub fn from_return(r: f64) -> Self {
        if r >= 0.0 {
            Label::Up
        } else {
            Label::Down
        }
    }

    /// Sign of a decision value; exactly zero maps to `Up`.
    pub fn from_decision(value: f64) -> Self {
        Self::from_return(value)
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Label::Up => 1.0,
            Label::Down => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Up => 1,
            Label::Down => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Up => Label::Down,
            Label::Down => Label::Up,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_i8())
    }
}
