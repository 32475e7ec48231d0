//! Weighted-contrast analysis of observational studies.
//!
//! Every adjustment method in this crate, whether a regression model, a
//! weighting scheme or a matching design, is reduced to a per-unit
//! [`WeightVector`]. The average treatment effect on the treated (ATT) is then
//! always the same contrast of weighted group means:
//!
//! ```text
//!     att = (1/n_t) Σ_treated w_i y_i  -  (1/n_c) Σ_control w_i y_i
//! ```
//!
//! with weights normalized so that each group's weights sum to its size.
//! Expressing regression this way exposes the weights it uses implicitly:
//! they balance covariate means exactly, but at a profile that may differ from
//! the treated population, and they can be negative.
//!
//! The crate is `no_std` (it needs `alloc`). Enable the `std` feature for a
//! wall-clock budget on the profile matching search.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod diagnostics;
pub mod error;
pub mod estimate;
pub mod implied;
pub mod linalg;
pub mod matching;
pub mod model;
pub mod weighting;

mod stats;

pub use diagnostics::{
    balance_table, effective_sample_size, implied_target_profile, negative_weight_report,
    sample_boundedness_check, BalanceRow, BalanceTable, Boundedness, NegativeWeightReport, StdDiff,
};
pub use error::{Error, Result};
pub use estimate::{pipeline, weighted_contrast, Analysis, Estimate, PipelineOptions};
pub use implied::{
    minvar_exact_balance_weights, mri_weights, uri_weights, weight_variance, BalanceGroup, Method,
    Target, WeightVector,
};
pub use matching::{
    distance_matrix, optimal_pair_match, profile_match, DistanceMatrix, MatchResult, Metric,
    ProfileMatchOptions, ToleranceScale,
};
pub use model::{
    build_design_matrix, group_means, ols_fit, Dataset, DesignSpec, Group, OlsFit, Term,
};
pub use weighting::{
    fit_propensity_logistic, ipw_att_weights, sbw_solve, PropensityFit, SbwConfig,
};
