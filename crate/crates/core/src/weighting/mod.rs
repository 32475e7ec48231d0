//! Weighting without an outcome model: logistic propensity scores with
//! inverse-odds weights for the ATT, and stable balancing weights.

mod propensity;
mod sbw;

pub use propensity::{
    fit_propensity_logistic, ipw_att_weights, log_likelihood, log_likelihood_gradient,
    PropensityFit, SEPARATION_NORM,
};
pub use sbw::{sbw_solve, sbw_solve_detailed, SbwConfig, SbwSolution, DEFAULT_DELTA};
