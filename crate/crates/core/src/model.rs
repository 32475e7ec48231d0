//! Dataset representation, design matrices and ordinary least squares.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::implied::WeightVector;
use crate::linalg::{Matrix, Qr};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Treated,
    Control,
}

/// An immutable observational sample: one row per unit with an id, a binary
/// treatment flag, `p` numeric covariates and an outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    ids: Vec<String>,
    treated: Vec<bool>,
    covariates: Vec<f64>,
    outcome: Vec<f64>,
    covariate_names: Vec<String>,
    treated_idx: Vec<usize>,
    control_idx: Vec<usize>,
}

impl Dataset {
    pub fn new(
        ids: Vec<String>,
        treated: Vec<bool>,
        covariates: Vec<Vec<f64>>,
        outcome: Vec<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Dataset> {
        let n = ids.len();
        let p = covariate_names.len();
        if treated.len() != n || covariates.len() != n || outcome.len() != n {
            return Err(Error::InvalidData(format!(
                "column lengths differ: {} ids, {} treatment flags, {} covariate rows, {} outcomes",
                n,
                treated.len(),
                covariates.len(),
                outcome.len()
            )));
        }
        if p == 0 {
            return Err(Error::InvalidData(
                "at least one covariate is required".into(),
            ));
        }
        let mut flat = Vec::with_capacity(n * p);
        for (i, row) in covariates.iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidData(format!(
                    "unit {} has {} covariates, expected {}",
                    ids[i],
                    row.len(),
                    p
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "unit {} has a non-finite value for covariate {}",
                    ids[i], covariate_names[j]
                )));
            }
            flat.extend_from_slice(row);
        }
        if let Some(i) = outcome.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "unit {} has a non-finite outcome",
                ids[i]
            )));
        }
        let mut seen = BTreeSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidData(format!("duplicate id {id}")));
            }
        }
        let treated_idx: Vec<usize> = (0..n).filter(|&i| treated[i]).collect();
        let control_idx: Vec<usize> = (0..n).filter(|&i| !treated[i]).collect();
        if treated_idx.len() < 2 || control_idx.len() < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 treated and 2 control units, found {} and {}",
                treated_idx.len(),
                control_idx.len()
            )));
        }
        Ok(Dataset {
            ids,
            treated,
            covariates: flat,
            outcome,
            covariate_names,
            treated_idx,
            control_idx,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn is_treated(&self, i: usize) -> bool {
        self.treated[i]
    }

    pub fn treatment(&self) -> &[bool] {
        &self.treated
    }

    pub fn group_of(&self, i: usize) -> Group {
        if self.treated[i] {
            Group::Treated
        } else {
            Group::Control
        }
    }

    pub fn covariate(&self, i: usize, j: usize) -> f64 {
        self.covariates[i * self.n_covariates() + j]
    }

    pub fn covariates_of(&self, i: usize) -> &[f64] {
        let p = self.n_covariates();
        &self.covariates[i * p..(i + 1) * p]
    }

    pub fn covariate_column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.covariate(i, j)).collect()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn outcome(&self, i: usize) -> f64 {
        self.outcome[i]
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcome
    }

    /// Unit indices of a group, in dataset order.
    pub fn group_indices(&self, group: Group) -> &[usize] {
        match group {
            Group::Treated => &self.treated_idx,
            Group::Control => &self.control_idx,
        }
    }

    pub fn group_size(&self, group: Group) -> usize {
        self.group_indices(group).len()
    }

    pub fn n_treated(&self) -> usize {
        self.treated_idx.len()
    }

    pub fn n_control(&self) -> usize {
        self.control_idx.len()
    }

    /// Pooled unweighted standard deviation `sqrt((s_t² + s_c²) / 2)` of
    /// covariate `j`, each group variance with divisor `n_g − 1`.
    pub fn pooled_sd(&self, j: usize) -> f64 {
        let t: Vec<f64> = self
            .treated_idx
            .iter()
            .map(|&i| self.covariate(i, j))
            .collect();
        let c: Vec<f64> = self
            .control_idx
            .iter()
            .map(|&i| self.covariate(i, j))
            .collect();
        libm::sqrt(0.5 * (stats::sample_variance(&t) + stats::sample_variance(&c)))
    }

    pub fn pooled_sds(&self) -> Vec<f64> {
        (0..self.n_covariates())
            .map(|j| self.pooled_sd(j))
            .collect()
    }

    /// Same units with `outcome` replaced.
    pub fn with_outcome(&self, outcome: Vec<f64>) -> Result<Dataset> {
        if outcome.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: outcome.len(),
            });
        }
        if outcome.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite outcome".into()));
        }
        Ok(Dataset {
            outcome,
            ..self.clone()
        })
    }

    /// Same units with an extra covariate column appended, e.g. a square or
    /// an interaction the caller wants balanced.
    pub fn with_covariate(&self, name: impl Into<String>, values: &[f64]) -> Result<Dataset> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: values.len(),
            });
        }
        let rows = (0..self.len())
            .map(|i| {
                let mut r = self.covariates_of(i).to_vec();
                r.push(values[i]);
                r
            })
            .collect();
        let mut names = self.covariate_names.clone();
        names.push(name.into());
        Dataset::new(
            self.ids.clone(),
            self.treated.clone(),
            rows,
            self.outcome.clone(),
            names,
        )
    }

    /// Units restricted to the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(
            indices.iter().map(|&i| self.ids[i].clone()).collect(),
            indices.iter().map(|&i| self.treated[i]).collect(),
            indices
                .iter()
                .map(|&i| self.covariates_of(i).to_vec())
                .collect(),
            indices.iter().map(|&i| self.outcome[i]).collect(),
            self.covariate_names.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Intercept,
    Covariate(usize),
    Treatment,
    /// Treatment indicator times a (possibly centered) covariate.
    Interaction(usize),
}

/// Ordered regression terms plus an optional centering profile applied to
/// covariates inside interaction terms.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    terms: Vec<Term>,
    centering: Option<Vec<f64>>,
}

impl DesignSpec {
    pub fn new(terms: Vec<Term>, centering: Option<Vec<f64>>) -> Result<DesignSpec> {
        let intercepts = terms.iter().filter(|t| **t == Term::Intercept).count();
        if intercepts != 1 {
            return Err(Error::InvalidDesign(format!(
                "expected exactly one intercept, found {intercepts}"
            )));
        }
        let treatments = terms.iter().filter(|t| **t == Term::Treatment).count();
        if treatments > 1 {
            return Err(Error::InvalidDesign("more than one treatment term".into()));
        }
        if treatments == 0 && terms.iter().any(|t| matches!(t, Term::Interaction(_))) {
            return Err(Error::InvalidDesign(
                "interaction terms require a treatment term".into(),
            ));
        }
        Ok(DesignSpec { terms, centering })
    }

    /// Intercept, every covariate, treatment: the single-equation model.
    pub fn additive(p: usize) -> DesignSpec {
        let mut terms = vec![Term::Intercept];
        terms.extend((0..p).map(Term::Covariate));
        terms.push(Term::Treatment);
        DesignSpec {
            terms,
            centering: None,
        }
    }

    /// Intercept and every covariate, without a treatment term.
    pub fn covariates_only(p: usize) -> DesignSpec {
        let mut terms = vec![Term::Intercept];
        terms.extend((0..p).map(Term::Covariate));
        DesignSpec {
            terms,
            centering: None,
        }
    }

    /// Intercept, covariates, treatment and every treatment × covariate
    /// interaction, with interactions centered at `centering` when given.
    pub fn interacted(p: usize, centering: Option<Vec<f64>>) -> DesignSpec {
        let mut terms = vec![Term::Intercept];
        terms.extend((0..p).map(Term::Covariate));
        terms.push(Term::Treatment);
        terms.extend((0..p).map(Term::Interaction));
        DesignSpec { terms, centering }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn centering(&self) -> Option<&[f64]> {
        self.centering.as_deref()
    }

    pub fn treatment_index(&self) -> Option<usize> {
        self.terms.iter().position(|t| *t == Term::Treatment)
    }

    pub fn has_interactions(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, Term::Interaction(_)))
    }

    /// Covariate indices used as main effects, in term order.
    pub fn covariate_indices(&self) -> Vec<usize> {
        self.terms
            .iter()
            .filter_map(|t| match t {
                Term::Covariate(j) => Some(*j),
                _ => None,
            })
            .collect()
    }

    pub fn validate_for(&self, p: usize) -> Result<()> {
        for t in &self.terms {
            if let Term::Covariate(j) | Term::Interaction(j) = t {
                if *j >= p {
                    return Err(Error::InvalidDesign(format!(
                        "covariate index {j} out of range for {p} covariates"
                    )));
                }
            }
        }
        if let Some(c) = &self.centering {
            if c.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: c.len(),
                });
            }
        }
        Ok(())
    }
}

/// Design matrix without the rank check.
pub(crate) fn design_rows(data: &Dataset, spec: &DesignSpec, rows: &[usize]) -> Matrix {
    let k = spec.terms.len();
    let mut m = Matrix::zeros(rows.len(), k);
    for (r, &i) in rows.iter().enumerate() {
        let z = if data.is_treated(i) { 1.0 } else { 0.0 };
        for (c, term) in spec.terms.iter().enumerate() {
            let v = match *term {
                Term::Intercept => 1.0,
                Term::Covariate(j) => data.covariate(i, j),
                Term::Treatment => z,
                Term::Interaction(j) => {
                    let center = spec.centering.as_ref().map_or(0.0, |c| c[j]);
                    z * (data.covariate(i, j) - center)
                }
            };
            m.set(r, c, v);
        }
    }
    m
}

/// Design matrix with columns in term order, one row per unit.
///
/// Fails with [`Error::RankDeficient`] naming the dependent columns when the
/// matrix does not have full column rank.
pub fn build_design_matrix(data: &Dataset, spec: &DesignSpec) -> Result<Matrix> {
    spec.validate_for(data.n_covariates())?;
    let rows: Vec<usize> = (0..data.len()).collect();
    let m = design_rows(data, spec, &rows);
    if m.rows() < m.cols() {
        return Err(Error::TooFewRows {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    Qr::factor(&m)?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl OlsFit {
    pub fn fitted(&self, outcome: &[f64]) -> Vec<f64> {
        outcome
            .iter()
            .zip(&self.residuals)
            .map(|(y, e)| y - e)
            .collect()
    }
}

/// Least squares by Householder QR of the design matrix.
pub fn ols_fit(design: &Matrix, outcome: &[f64]) -> Result<OlsFit> {
    if outcome.len() != design.rows() {
        return Err(Error::DimensionMismatch {
            expected: design.rows(),
            found: outcome.len(),
        });
    }
    if design.rows() < design.cols() {
        return Err(Error::TooFewRows {
            rows: design.rows(),
            cols: design.cols(),
        });
    }
    let qr = Qr::factor(design)?;
    let coefficients = qr.least_squares(outcome);
    let fitted = design.mul_vec(&coefficients);
    let residuals = outcome.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    Ok(OlsFit {
        coefficients,
        residuals,
    })
}

/// Per-group weighted covariate means, `(1/n_g) Σ_{i∈g} w_i x_i`. With no
/// weights these are the raw group means.
pub fn group_means(data: &Dataset, weights: Option<&WeightVector>) -> Result<(Vec<f64>, Vec<f64>)> {
    if let Some(w) = weights {
        if w.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                found: w.len(),
            });
        }
    }
    let profile = |g: Group| {
        let idx = data.group_indices(g);
        let mut out = vec![0.0; data.n_covariates()];
        for &i in idx {
            let wi = weights.map_or(1.0, |w| w.weights()[i]);
            crate::linalg::axpy(wi, data.covariates_of(i), &mut out);
        }
        let n = idx.len() as f64;
        out.iter_mut().for_each(|v| *v /= n);
        out
    };
    Ok((profile(Group::Treated), profile(Group::Control)))
}
