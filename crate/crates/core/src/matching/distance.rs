use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, PivotedCholesky};
use crate::model::{Dataset, Group};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    /// Quadratic form in the inverse of the all-unit sample covariance.
    #[default]
    Mahalanobis,
    /// Euclidean distance after dividing each covariate by its all-unit
    /// sample standard deviation.
    NormalizedEuclidean,
}

/// Treated × control distances. Rows follow the dataset's treated units in
/// order, columns its control units.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub entries: Matrix,
    pub metric: Metric,
    /// Set when Mahalanobis was requested but the covariance was singular.
    pub fell_back: bool,
}

/// Distances with the requested metric, falling back to the normalized
/// Euclidean metric when the covariance matrix is singular.
pub fn distance_matrix(data: &Dataset, metric: Metric) -> Result<DistanceMatrix> {
    distance_matrix_with(data, metric, true)
}

pub fn distance_matrix_with(
    data: &Dataset,
    metric: Metric,
    allow_fallback: bool,
) -> Result<DistanceMatrix> {
    let p = data.n_covariates();
    let n = data.len();
    let means: Vec<f64> = (0..p)
        .map(|j| stats::mean((0..n).map(|i| data.covariate(i, j))))
        .collect();

    let mut used = metric;
    let mut fell_back = false;
    let mut chol = None;
    if metric == Metric::Mahalanobis {
        let mut cov = Matrix::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                let s: f64 = (0..n)
                    .map(|i| (data.covariate(i, a) - means[a]) * (data.covariate(i, b) - means[b]))
                    .sum::<f64>()
                    / (n - 1) as f64;
                cov.set(a, b, s);
                cov.set(b, a, s);
            }
        }
        let c = PivotedCholesky::factor(&cov, 1e-12);
        if c.rank() == p {
            chol = Some(c);
        } else if allow_fallback {
            used = Metric::NormalizedEuclidean;
            fell_back = true;
        } else {
            return Err(Error::SingularCovariance);
        }
    }

    let sds: Vec<f64> = (0..p)
        .map(|j| libm::sqrt(stats::sample_variance(&data.covariate_column(j))))
        .collect();
    let whiten = |i: usize| -> Vec<f64> {
        match &chol {
            Some(c) => c.whiten(data.covariates_of(i)),
            None => (0..p)
                .map(|j| {
                    if sds[j] > 0.0 {
                        data.covariate(i, j) / sds[j]
                    } else {
                        0.0
                    }
                })
                .collect(),
        }
    };
    let treated = data.group_indices(Group::Treated);
    let controls = data.group_indices(Group::Control);
    let wt: Vec<Vec<f64>> = treated.iter().map(|&i| whiten(i)).collect();
    let wc: Vec<Vec<f64>> = controls.iter().map(|&i| whiten(i)).collect();
    let mut entries = Matrix::zeros(treated.len(), controls.len());
    for (r, a) in wt.iter().enumerate() {
        for (c, b) in wc.iter().enumerate() {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            entries.set(r, c, libm::sqrt(d2));
        }
    }
    Ok(DistanceMatrix {
        entries,
        metric: used,
        fell_back,
    })
}
