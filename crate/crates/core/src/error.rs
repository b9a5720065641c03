use thiserror::Error;

use crate::estim::Arm;

/// Errors produced by the estimation, inference and simulation routines.
///
/// Degenerate inputs surface as typed variants instead of NaN so that a
/// simulation harness can count them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("curve never reaches survival {level}")]
    NotReached { level: f64 },

    #[error("median not reached in the {arm} arm")]
    MedianNotReached { arm: Arm },

    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),

    #[error("numerical failure in {routine}: {detail}")]
    Numerical { routine: &'static str, detail: String },

    #[error("censored observations are not supported here ({censored} censored)")]
    UnsupportedCensoring { censored: usize },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "no grid point accepted (observed LLP {observed_llp:.4}, grid [{grid_lo}, {grid_hi}]); widen the grid"
    )]
    EmptyAcceptance {
        observed_llp: f64,
        grid_lo: f64,
        grid_hi: f64,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(routine: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical {
            routine,
            detail: detail.into(),
        }
    }

    /// True for failures of an iterative numerical routine (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. } | Error::EmptyAcceptance { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
