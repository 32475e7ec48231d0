use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "rank-deficient design: columns {columns:?} are linearly dependent on earlier columns"
    )]
    RankDeficient { columns: Vec<usize> },

    #[error("too few observations: {rows} rows for {cols} columns")]
    TooFewRows { rows: usize, cols: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("balance constraint for covariate {dimension} cannot be met: target lies outside the affine hull of the group")]
    BalanceInfeasible { dimension: usize },

    #[error("complete or quasi-complete separation along direction {direction:?}")]
    Separation { direction: Vec<f64> },

    #[error("propensity score {score} of control unit {id} makes its odds unbounded")]
    UnboundedWeight { id: String, score: f64 },

    #[error("balancing weights infeasible at the requested tolerances; minimum feasible delta per covariate {min_delta:?} (uniform {uniform_delta})")]
    SbwInfeasible {
        min_delta: Vec<f64>,
        uniform_delta: f64,
    },

    #[error("solver did not converge after {iterations} iterations; residual trace {trace:?}")]
    NotConverged { iterations: usize, trace: Vec<f64> },

    #[error("no nonempty control subset meets the balance tolerances")]
    NoFeasibleSubset,

    #[error("{0}")]
    SizeLimit(String),

    #[error("covariance matrix is singular")]
    SingularCovariance,

    #[error("more treated units ({treated}) than controls ({controls}) for 1:1 matching")]
    TooFewControls { treated: usize, controls: usize },
}

impl Error {
    /// True for failures of a solver or of the problem's feasibility, as
    /// opposed to malformed input.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::BalanceInfeasible { .. }
                | Error::Separation { .. }
                | Error::UnboundedWeight { .. }
                | Error::SbwInfeasible { .. }
                | Error::NotConverged { .. }
                | Error::NoFeasibleSubset
                | Error::SizeLimit(_)
                | Error::TooFewControls { .. }
        )
    }
}
