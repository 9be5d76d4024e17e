use thiserror::Error;

/// Errors raised by the inference routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The exact p-value is too close to 0 or 1 for the exact-corrected
    /// anchor to be finite.
    #[error("degenerate calibration: exact p-value {p_exact:e} leaves the anchor undefined")]
    DegenerateCalibration { p_exact: f64 },

    /// The inversion accepted no hypothesized difference on its scan grid.
    #[error("the {method} acceptance set is empty on the scan grid")]
    EmptyConfidenceSet { method: &'static str },

    /// A required argument is missing or inconsistent with the method.
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
