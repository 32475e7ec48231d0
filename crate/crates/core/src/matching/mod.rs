//! Matching designs: optimal 1:1 pair matching on a covariate distance, and
//! profile matching, which keeps the largest control subset whose means sit
//! within tolerance of the target profile.
//!
//! Both produce uniform weights over the retained controls.

mod assignment;
mod distance;
mod profile;

use alloc::string::String;
use alloc::vec::Vec;

pub use assignment::{optimal_pair_match, solve_assignment};
pub use distance::{distance_matrix, distance_matrix_with, DistanceMatrix, Metric};
pub use profile::{
    profile_match, ProfileMatchOptions, ToleranceScale, DEFAULT_TOLERANCE, MAX_EXACT_CONTROLS,
};

use crate::implied::WeightVector;

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// `(treated id, control id)`; empty for profile matching.
    pub pairs: Vec<(String, String)>,
    /// Retained control ids, sorted.
    pub selected_controls: Vec<String>,
    /// Sum of matched distances (pair matching); 0 for profile matching.
    pub total_distance: f64,
    pub weights: WeightVector,
}
