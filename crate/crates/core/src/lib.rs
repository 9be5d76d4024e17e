//! Exact and asymptotic inference on the risk difference `d = P_T - P_C`
//! of two independent binomials, aimed at noninferiority trials.
//!
//! All routines work on the difference scale `Δ` (a hypothesized value of
//! `P_T - P_C`). Noninferiority margins `δ₀ > 0` put the null boundary at
//! `Δ₀ = -δ₀`; the [`Convention`] type converts to and from the margin
//! scale `δ = -Δ` used in much of the noninferiority literature.

pub mod ci;
pub mod coverage;
pub mod diagnostics;
pub mod ec;
pub mod error;
pub mod exact;
pub mod prob;
pub mod score;

pub use error::{Error, Result};

use serde::{Serialize, Serializer};

/// Scale on which differences are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Margin scale `δ = -(P_T - P_C)`.
    #[default]
    Delta,
    /// Difference scale `Δ = P_T - P_C`.
    Cap,
}

impl Convention {
    /// Converts a value on this scale to the internal `Δ` scale.
    pub fn to_cap(self, value: f64) -> f64 {
        match self {
            Self::Delta => -value,
            Self::Cap => value,
        }
    }

    /// Converts an internal `Δ` value to this scale.
    pub fn from_cap(self, value: f64) -> f64 {
        match self {
            Self::Delta => -value,
            Self::Cap => value,
        }
    }

    /// Maps a `Δ`-scale interval to this scale, keeping `lo <= hi`.
    pub fn interval_from_cap(self, (lo, hi): (f64, f64)) -> (f64, f64) {
        match self {
            Self::Delta => (-hi, -lo),
            Self::Cap => (lo, hi),
        }
    }
}

/// Serializes non-finite values as the strings `"inf"`, `"-inf"` or `"nan"`
/// since JSON has no representation for them.
pub fn serialize_extended<S: Serializer>(
    value: &f64,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    if value.is_finite() {
        s.serialize_f64(*value)
    } else if value.is_nan() {
        s.serialize_str("nan")
    } else if *value > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}
