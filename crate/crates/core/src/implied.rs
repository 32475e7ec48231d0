//! Weights implied by regression estimators of the ATT, and the
//! minimum-variance exact-balance weights that characterize them.
//!
//! A least-squares coefficient is a linear functional of the outcome:
//! `τ̂ = aᵀ y` with `a = X (XᵀX)⁻¹ e_τ`. Reading `a` off the design
//! factorization gives the implied weights exactly, for every outcome at
//! once. Rescaling `a` by the group sizes turns it into the weighted-contrast
//! form with each group's weights summing to the group size.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, PivotedCholesky, Qr};
use crate::model::{design_rows, Dataset, DesignSpec, Group, Term};
use crate::stats;

/// Normalization is checked to this multiple of the group size.
const NORMALIZATION_TOLERANCE: f64 = 1e-8;

/// Constraint residual, in within-group standard deviations, above which an
/// exact-balance target is declared infeasible.
const BALANCE_FEASIBILITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Single regression with a treatment indicator.
    Uri,
    /// Separate control-group regression, predictions averaged over treated.
    Mri,
    Ipw,
    Sbw,
    PairMatch,
    ProfileMatch,
    Uniform,
    /// Minimum-variance exact-balance weights at a caller-chosen target.
    MinVariance,
}

impl Method {
    /// Every method the pipeline runs, in canonical report order.
    pub const PIPELINE: [Method; 7] = [
        Method::Uniform,
        Method::Uri,
        Method::Mri,
        Method::Ipw,
        Method::Sbw,
        Method::PairMatch,
        Method::ProfileMatch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Uri => "uri",
            Method::Mri => "mri",
            Method::Ipw => "ipw",
            Method::Sbw => "sbw",
            Method::PairMatch => "pair",
            Method::ProfileMatch => "profile",
            Method::Uniform => "uniform",
            Method::MinVariance => "minvar",
        }
    }

    /// Whether the method's weights are guaranteed non-negative.
    pub fn is_nonnegative(self) -> bool {
        !matches!(self, Method::Uri | Method::Mri | Method::MinVariance)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s.to_ascii_lowercase().as_str() {
            "uri" => Ok(Method::Uri),
            "mri" => Ok(Method::Mri),
            "ipw" => Ok(Method::Ipw),
            "sbw" => Ok(Method::Sbw),
            "pair" | "pair_match" => Ok(Method::PairMatch),
            "profile" | "profile_match" => Ok(Method::ProfileMatch),
            "uniform" => Ok(Method::Uniform),
            "minvar" => Ok(Method::MinVariance),
            other => Err(Error::InvalidDesign(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Target {
    /// Average treatment effect on the treated.
    #[default]
    Att,
}

/// Per-unit weights aligned with a dataset's units.
///
/// Each group's weights sum to the group size, so a weight of 1 counts the
/// unit once. Only regression-type methods may produce negative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    method: Method,
    target: Target,
    ids: Vec<String>,
    treated: Vec<bool>,
}

impl WeightVector {
    pub fn new(data: &Dataset, weights: Vec<f64>, method: Method) -> Result<WeightVector> {
        if weights.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                found: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidWeights(format!(
                "weight of unit {} is not finite",
                data.id(i)
            )));
        }
        if method.is_nonnegative() {
            if let Some(i) = weights.iter().position(|&w| w < 0.0) {
                return Err(Error::InvalidWeights(format!(
                    "{method} weights must be non-negative, unit {} has {}",
                    data.id(i),
                    weights[i]
                )));
            }
        }
        for g in [Group::Treated, Group::Control] {
            let idx = data.group_indices(g);
            let sum: f64 = idx.iter().map(|&i| weights[i]).sum();
            let n = idx.len() as f64;
            if (sum - n).abs() > NORMALIZATION_TOLERANCE * n {
                return Err(Error::InvalidWeights(format!(
                    "{g:?} weights sum to {sum}, expected the group size {n}"
                )));
            }
        }
        Ok(WeightVector {
            weights,
            method,
            target: Target::Att,
            ids: data.ids().to_vec(),
            treated: data.treatment().to_vec(),
        })
    }

    pub fn uniform(data: &Dataset) -> WeightVector {
        WeightVector {
            weights: vec![1.0; data.len()],
            method: Method::Uniform,
            target: Target::Att,
            ids: data.ids().to_vec(),
            treated: data.treatment().to_vec(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn is_treated(&self, i: usize) -> bool {
        self.treated[i]
    }

    /// Weights of one group, in unit order.
    pub fn group(&self, group: Group) -> Vec<f64> {
        let want = group == Group::Treated;
        self.weights
            .iter()
            .zip(&self.treated)
            .filter(|(_, &t)| t == want)
            .map(|(w, _)| *w)
            .collect()
    }

    /// True when the vector belongs to `data` (same ids and groups).
    pub fn conforms_to(&self, data: &Dataset) -> bool {
        self.ids.as_slice() == data.ids() && self.treated.as_slice() == data.treatment()
    }
}

/// Implied weights of the single-equation regression
/// `y ~ intercept + covariates + treatment`, whose treatment coefficient is the
/// weighted contrast under these weights for every outcome vector.
pub fn uri_weights(data: &Dataset, spec: &DesignSpec) -> Result<WeightVector> {
    spec.validate_for(data.n_covariates())?;
    if spec.has_interactions() {
        return Err(Error::InvalidDesign(
            "implied weights of the single regression take no interaction terms".into(),
        ));
    }
    let tau = spec
        .treatment_index()
        .ok_or_else(|| Error::InvalidDesign("design has no treatment term".into()))?;
    let rows: Vec<usize> = (0..data.len()).collect();
    let design = design_rows(data, spec, &rows);
    if design.rows() < design.cols() {
        return Err(Error::TooFewRows {
            rows: design.rows(),
            cols: design.cols(),
        });
    }
    let qr = Qr::factor(&design)?;
    let mut e = vec![0.0; design.cols()];
    e[tau] = 1.0;
    let a = qr.functional(&e);
    let (nt, nc) = (data.n_treated() as f64, data.n_control() as f64);
    let w = a
        .iter()
        .enumerate()
        .map(|(i, ai)| {
            if data.is_treated(i) {
                nt * ai
            } else {
                -nc * ai
            }
        })
        .collect();
    WeightVector::new(data, w, Method::Uri)
}

/// Implied weights of the separate-regression ATT estimator: fit
/// `y ~ intercept + covariates` on controls, predict for every treated unit,
/// and contrast. Treated weights are 1; control weights reproduce the mean
/// prediction for every control outcome vector.
pub fn mri_weights(data: &Dataset, spec: &DesignSpec) -> Result<WeightVector> {
    spec.validate_for(data.n_covariates())?;
    let mut terms = vec![Term::Intercept];
    terms.extend(spec.covariate_indices().into_iter().map(Term::Covariate));
    let control_spec = DesignSpec::new(terms, None)?;
    let controls = data.group_indices(Group::Control);
    let design = design_rows(data, &control_spec, controls);
    if design.rows() < design.cols() {
        return Err(Error::TooFewRows {
            rows: design.rows(),
            cols: design.cols(),
        });
    }
    let qr = Qr::factor(&design)?;
    let treated_rows = design_rows(data, &control_spec, data.group_indices(Group::Treated));
    let nt = data.n_treated() as f64;
    let mut profile = treated_rows.tr_mul_vec(&vec![1.0; treated_rows.rows()]);
    profile.iter_mut().for_each(|v| *v /= nt);
    let b = qr.functional(&profile);
    let nc = controls.len() as f64;
    let mut w = vec![1.0; data.len()];
    for (k, &i) in controls.iter().enumerate() {
        w[i] = nc * b[k];
    }
    WeightVector::new(data, w, Method::Mri)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceGroup {
    Control,
    Both,
}

/// Weights of minimum within-group variance that balance the group's
/// covariate means exactly at `target`, with the group-size normalization.
/// Negative weights are allowed.
///
/// Solved from the KKT system of the equality-constrained quadratic program:
/// with `C` the constraint rows (ones, then standardized covariates),
/// `w = 1 + Cᵀ μ` where `(C Cᵀ) μ = r`. Groups not being balanced keep
/// weight 1.
pub fn minvar_exact_balance_weights(
    data: &Dataset,
    target: &[f64],
    group: BalanceGroup,
) -> Result<WeightVector> {
    let p = data.n_covariates();
    if target.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: target.len(),
        });
    }
    let groups: &[Group] = match group {
        BalanceGroup::Control => &[Group::Control],
        BalanceGroup::Both => &[Group::Treated, Group::Control],
    };
    let mut w = vec![1.0; data.len()];
    for &g in groups {
        let idx = data.group_indices(g);
        let gw = minvar_group(data, idx, target)?;
        for (k, &i) in idx.iter().enumerate() {
            w[i] = gw[k];
        }
    }
    WeightVector::new(data, w, Method::MinVariance)
}

fn minvar_group(data: &Dataset, idx: &[usize], target: &[f64]) -> Result<Vec<f64>> {
    let p = data.n_covariates();
    let n = idx.len();
    let nf = n as f64;
    let mut center = vec![0.0; p];
    let mut scale = vec![1.0; p];
    for j in 0..p {
        let col: Vec<f64> = idx.iter().map(|&i| data.covariate(i, j)).collect();
        center[j] = stats::mean(col.iter().copied());
        let sd = libm::sqrt(stats::sample_variance(&col));
        if sd > 0.0 {
            scale[j] = sd;
        }
    }
    // constraint rows: [1; z_1; ...; z_p] with z standardized within group
    let z = |i: usize, j: usize| (data.covariate(i, j) - center[j]) / scale[j];
    let m = p + 1;
    let mut gram = Matrix::zeros(m, m);
    gram.set(0, 0, nf);
    for a in 0..p {
        for b in a..p {
            let s: f64 = idx.iter().map(|&i| z(i, a) * z(i, b)).sum();
            gram.set(a + 1, b + 1, s);
            gram.set(b + 1, a + 1, s);
        }
    }
    let mut rhs = vec![0.0; m];
    for j in 0..p {
        rhs[j + 1] = nf * (target[j] - center[j]) / scale[j];
    }
    let chol = PivotedCholesky::factor(&gram, 1e-13);
    let mu = chol.solve(&rhs);
    let w: Vec<f64> = idx
        .iter()
        .map(|&i| {
            let mut d = mu[0];
            for j in 0..p {
                d += mu[j + 1] * z(i, j);
            }
            1.0 + d
        })
        .collect();
    for j in 0..p {
        let achieved: f64 = idx.iter().zip(&w).map(|(&i, wi)| wi * z(i, j)).sum::<f64>() / nf;
        let wanted = rhs[j + 1] / nf;
        if (achieved - wanted).abs() > BALANCE_FEASIBILITY_TOLERANCE * (1.0 + wanted.abs()) {
            return Err(Error::BalanceInfeasible { dimension: j });
        }
    }
    Ok(w)
}

/// Within-group variance of the weights, divisor `n_g`.
pub fn weight_variance(weights: &WeightVector, group: Group) -> f64 {
    let g = weights.group(group);
    if g.is_empty() {
        return 0.0;
    }
    let m = stats::mean(g.iter().copied());
    g.iter().map(|w| (w - m) * (w - m)).sum::<f64>() / g.len() as f64
}
