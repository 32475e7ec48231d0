//! The weighted contrast and the per-method pipeline feeding it.

use alloc::string::String;
use alloc::vec::Vec;

use crate::diagnostics::{
    balance_table, implied_target_profile, negative_weight_report, sample_boundedness_check,
    BalanceTable, Boundedness, NegativeWeightReport,
};
use crate::error::{Error, Result};
use crate::implied::{
    minvar_exact_balance_weights, mri_weights, uri_weights, BalanceGroup, Method, WeightVector,
};
use crate::matching::{
    distance_matrix, optimal_pair_match, profile_match, MatchResult, Metric, ProfileMatchOptions,
};
use crate::model::{group_means, Dataset, DesignSpec, Group};
use crate::weighting::{fit_propensity_logistic, ipw_att_weights, sbw_solve, SbwConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub att: f64,
    pub method: Method,
    /// Units with nonzero weight, `(treated, control)`.
    pub n_used: (usize, usize),
    /// Balance against the treated profile.
    pub diagnostics: BalanceTable,
    pub sample_bounded: bool,
}

/// `(1/n_t) Σ_t w_i y_i − (1/n_c) Σ_c w_i y_i`, with its balance table
/// against the treated profile.
pub fn weighted_contrast(data: &Dataset, weights: &WeightVector) -> Result<Estimate> {
    if !weights.conforms_to(data) {
        return Err(Error::InvalidWeights(
            "weights belong to a different dataset".into(),
        ));
    }
    let w = weights.weights();
    let part = |g: Group| {
        let idx = data.group_indices(g);
        let sum: f64 = idx.iter().map(|&i| w[i] * data.outcome(i)).sum();
        let used = idx.iter().filter(|&&i| w[i] != 0.0).count();
        (sum / idx.len() as f64, used)
    };
    let (yt, ut) = part(Group::Treated);
    let (yc, uc) = part(Group::Control);
    let att = yt - yc;
    let (target, _) = group_means(data, None)?;
    Ok(Estimate {
        att,
        method: weights.method(),
        n_used: (ut, uc),
        diagnostics: balance_table(data, weights, &target)?,
        sample_bounded: sample_boundedness_check(data, weights, att).is_bounded(),
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineOptions {
    pub sbw: SbwConfig,
    pub profile: ProfileMatchOptions,
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub weights: WeightVector,
    pub estimate: Estimate,
    pub negative_weights: NegativeWeightReport,
    pub boundedness: Boundedness,
    /// The profile the regression balances at (single-regression weights only).
    pub implied_profile: Option<Vec<f64>>,
    pub match_result: Option<MatchResult>,
    /// Warnings worth showing next to the estimate.
    pub notes: Vec<String>,
}

/// Runs one method's weight producer, then the diagnostics and the
/// contrast. Covariate models are additive in every covariate; balance
/// targets the treated profile.
pub fn pipeline(data: &Dataset, method: Method, options: &PipelineOptions) -> Result<Analysis> {
    let p = data.n_covariates();
    let (target, _) = group_means(data, None)?;
    let mut notes = Vec::new();
    let mut match_result = None;
    let weights = match method {
        Method::Uniform => WeightVector::uniform(data),
        Method::Uri => uri_weights(data, &DesignSpec::additive(p))?,
        Method::Mri => mri_weights(data, &DesignSpec::additive(p))?,
        Method::MinVariance => minvar_exact_balance_weights(data, &target, BalanceGroup::Control)?,
        Method::Ipw => {
            let fit = fit_propensity_logistic(data)?;
            if !fit.converged {
                notes.push(String::from(
                    "propensity model did not reach the gradient tolerance",
                ));
            }
            ipw_att_weights(&fit, data)?
        }
        Method::Sbw => sbw_solve(data, &target, &options.sbw)?,
        Method::PairMatch => {
            let d = distance_matrix(data, options.metric)?;
            if d.fell_back {
                notes.push(String::from(
                    "covariance matrix is singular; matched on normalized Euclidean distance",
                ));
            }
            let m = optimal_pair_match(data, &d)?;
            let w = m.weights.clone();
            match_result = Some(m);
            w
        }
        Method::ProfileMatch => {
            let m = profile_match(data, &target, &options.profile)?;
            let w = m.weights.clone();
            match_result = Some(m);
            w
        }
    };
    let estimate = weighted_contrast(data, &weights)?;
    let boundedness = sample_boundedness_check(data, &weights, estimate.att);
    let implied_profile = if method == Method::Uri {
        Some(implied_target_profile(data, &weights)?)
    } else {
        None
    };
    if estimate.diagnostics.ess_caveat {
        notes.push(String::from(
            "negative weights present; effective sample size is not a head count",
        ));
    }
    Ok(Analysis {
        negative_weights: negative_weight_report(&weights),
        weights,
        estimate,
        boundedness,
        implied_profile,
        match_result,
        notes,
    })
}
