use thiserror::Error;

use crate::combinatorics::MomentKind;

pub type Result<T> = std::result::Result<T, InarError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InarError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index ({row}, {col}) outside the supported table 0 <= j <= r <= {max}")]
    OutOfRange { row: usize, col: usize, max: usize },

    #[error("expected a {expected:?} vector, got {found:?}")]
    KindMismatch {
        expected: MomentKind,
        found: MomentKind,
    },

    #[error("{0}")]
    Unsupported(String),

    #[error("probability {value:e} at index {index} is negative beyond round-off")]
    NegativeProbability { index: usize, value: f64 },

    #[error("invalid model configuration: {0}")]
    Config(String),
}

impl InarError {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        InarError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
