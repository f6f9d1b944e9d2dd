//! Annotation cost arithmetic in exact integer currency.

use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One millionth of a dollar. Per-object rates such as $0.036 are sub-cent,
/// so rates are held at this resolution and totals rounded to cents.
pub const MICROS_PER_CENT: u128 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cents(pub u64);

impl Cents {
    pub fn dollars(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("rate must be a finite non-negative amount, got {0}")]
    InvalidRate(f64),
    #[error("annotators must be at least 1")]
    NoAnnotators,
    #[error("saving ratio undefined: method annotates no frames")]
    UndefinedSaving,
    #[error("frame counts must be finite and non-negative")]
    InvalidCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostConfig {
    pub rate_micros: u64,
    pub annotators: u32,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            rate_micros: 36_000,
            annotators: 1,
        }
    }
}

impl CostConfig {
    pub fn from_usd(rate_usd: f64, annotators: u32) -> Result<Self, CostError> {
        if !(rate_usd.is_finite() && rate_usd >= 0.0) {
            return Err(CostError::InvalidRate(rate_usd));
        }
        if annotators == 0 {
            return Err(CostError::NoAnnotators);
        }
        Ok(Self {
            rate_micros: libm::round(rate_usd * 1e6) as u64,
            annotators,
        })
    }

    pub fn rate_usd(&self) -> f64 {
        self.rate_micros as f64 / 1e6
    }
}

/// `frames x objects x rate x annotators`, rounded half-up to cents.
pub fn annotation_cost(frames: u64, objects_per_frame: u64, cfg: &CostConfig) -> Cents {
    let micros = u128::from(frames) * u128::from(objects_per_frame) * u128::from(cfg.rate_micros) * u128::from(cfg.annotators.max(1));
    let cents = (micros + MICROS_PER_CENT / 2) / MICROS_PER_CENT;
    Cents(u64::try_from(cents).unwrap_or(u64::MAX))
}

/// How many times fewer frames the method annotates than the baseline.
/// Works on counts or on percentages alike.
pub fn saving_ratio(baseline: f64, method: f64) -> Result<f64, CostError> {
    if !(baseline.is_finite() && method.is_finite() && baseline >= 0.0 && method >= 0.0) {
        return Err(CostError::InvalidCount);
    }
    if method == 0.0 {
        return Err(CostError::UndefinedSaving);
    }
    Ok(baseline / method)
}
