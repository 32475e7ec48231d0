//! Balance dashboard: weighted means against a target profile, effective
//! sample sizes, negative-weight census, the profile regression actually
//! balances at, and sample-boundedness of an estimate.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::implied::{Method, WeightVector};
use crate::model::{group_means, Dataset, Group};

/// Standardized mean difference; infinite when the pooled standard
/// deviation is zero but the means differ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StdDiff {
    Finite(f64),
    Infinite,
}

impl StdDiff {
    fn new(mean: f64, target: f64, sd: f64) -> StdDiff {
        let gap = mean - target;
        if gap == 0.0 {
            StdDiff::Finite(0.0)
        } else if sd > 0.0 {
            StdDiff::Finite(gap / sd)
        } else {
            StdDiff::Infinite
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            StdDiff::Finite(v) => Some(v),
            StdDiff::Infinite => None,
        }
    }

    pub fn abs(self) -> f64 {
        match self {
            StdDiff::Finite(v) => v.abs(),
            StdDiff::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceRow {
    pub name: String,
    pub treated_mean: f64,
    pub control_mean: f64,
    pub target_mean: f64,
    pub std_diff_treated: StdDiff,
    pub std_diff_control: StdDiff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceTable {
    pub rows: Vec<BalanceRow>,
    pub ess_treated: f64,
    pub ess_control: f64,
    pub nominal_treated: usize,
    pub nominal_control: usize,
    /// Set when negative weights make the ESS lose its head-count meaning.
    pub ess_caveat: bool,
}

impl BalanceTable {
    /// Largest absolute standardized difference of either group from the
    /// target.
    pub fn max_abs_std_diff(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| [r.std_diff_treated.abs(), r.std_diff_control.abs()])
            .fold(0.0, f64::max)
    }
}

/// Kish effective sample size `(Σw)² / Σw²` within a group.
pub fn effective_sample_size(weights: &WeightVector, group: Group) -> Result<f64> {
    let g = weights.group(group);
    let sum: f64 = g.iter().sum();
    let sq: f64 = g.iter().map(|w| w * w).sum();
    if sq == 0.0 {
        return Err(Error::InvalidWeights(
            "effective sample size of an all-zero group".into(),
        ));
    }
    Ok(sum * sum / sq)
}

/// Weighted group means against `target`, standardized by the pooled
/// unweighted standard deviation of each covariate.
pub fn balance_table(
    data: &Dataset,
    weights: &WeightVector,
    target: &[f64],
) -> Result<BalanceTable> {
    let p = data.n_covariates();
    if target.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: target.len(),
        });
    }
    if !weights.conforms_to(data) {
        return Err(Error::InvalidWeights(
            "weights do not belong to this dataset".into(),
        ));
    }
    let (t, c) = group_means(data, Some(weights))?;
    let rows = (0..p)
        .map(|j| {
            let sd = data.pooled_sd(j);
            BalanceRow {
                name: data.covariate_names()[j].clone(),
                treated_mean: t[j],
                control_mean: c[j],
                target_mean: target[j],
                std_diff_treated: StdDiff::new(t[j], target[j], sd),
                std_diff_control: StdDiff::new(c[j], target[j], sd),
            }
        })
        .collect();
    Ok(BalanceTable {
        rows,
        ess_treated: effective_sample_size(weights, Group::Treated)?,
        ess_control: effective_sample_size(weights, Group::Control)?,
        nominal_treated: data.n_treated(),
        nominal_control: data.n_control(),
        ess_caveat: weights.weights().iter().any(|&w| w < 0.0),
    })
}

/// The covariate profile at which the single regression balances both
/// groups: their common weighted mean under the implied weights.
pub fn implied_target_profile(data: &Dataset, uri: &WeightVector) -> Result<Vec<f64>> {
    if uri.method() != Method::Uri {
        return Err(Error::InvalidWeights(alloc::format!(
            "implied target profile needs single-regression weights, got {}",
            uri.method()
        )));
    }
    if !uri.conforms_to(data) {
        return Err(Error::InvalidWeights(
            "weights do not belong to this dataset".into(),
        ));
    }
    let (t, c) = group_means(data, Some(uri))?;
    Ok(t.iter().zip(&c).map(|(a, b)| 0.5 * (a + b)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeWeightReport {
    pub count: usize,
    /// Ids of negatively weighted units, largest magnitude first.
    pub ids: Vec<String>,
    pub total_negative_mass: f64,
    pub max_magnitude_id: Option<String>,
}

pub fn negative_weight_report(weights: &WeightVector) -> NegativeWeightReport {
    let mut neg: Vec<(f64, &str)> = weights
        .weights()
        .iter()
        .enumerate()
        .filter(|(_, &w)| w < 0.0)
        .map(|(i, &w)| (w, weights.id(i)))
        .collect();
    // most negative first, ties by id
    neg.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    NegativeWeightReport {
        count: neg.len(),
        total_negative_mass: neg.iter().map(|(w, _)| w).sum(),
        max_magnitude_id: neg.first().map(|(_, id)| String::from(*id)),
        ids: neg.into_iter().map(|(_, id)| String::from(id)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundedness {
    /// Range of all treated-minus-control outcome differences.
    pub interval: (f64, f64),
    /// The estimate falls outside `interval`.
    pub outside: bool,
    /// Negative weights are present, so the contrast can leave the range.
    pub extrapolation_capable: bool,
}

impl Boundedness {
    pub fn is_bounded(&self) -> bool {
        !self.outside
    }
}

pub fn sample_boundedness_check(data: &Dataset, weights: &WeightVector, att: f64) -> Boundedness {
    let range = |g: Group| {
        data.group_indices(g)
            .iter()
            .map(|&i| data.outcome(i))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
                (lo.min(y), hi.max(y))
            })
    };
    let (t_lo, t_hi) = range(Group::Treated);
    let (c_lo, c_hi) = range(Group::Control);
    let interval = (t_lo - c_hi, t_hi - c_lo);
    Boundedness {
        interval,
        outside: att < interval.0 || att > interval.1,
        extrapolation_capable: weights.weights().iter().any(|&w| w < 0.0),
    }
}
