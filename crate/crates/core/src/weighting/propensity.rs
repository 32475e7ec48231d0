use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::implied::{Method, WeightVector};
use crate::linalg::{Matrix, PivotedCholesky, Qr};
use crate::model::{Dataset, Group};
use crate::stats;

const MAX_ITERATIONS: usize = 50;
const GRADIENT_TOLERANCE: f64 = 1e-8;

/// Norm of the standardized slope vector beyond which the likelihood is
/// taken to have no finite maximizer (the groups are separable).
pub const SEPARATION_NORM: f64 = 30.0;

/// Control scores at or above `1 − UNBOUNDED_SCORE` have unbounded odds.
const UNBOUNDED_SCORE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PropensityFit {
    /// Intercept followed by one slope per covariate, on the data's scale.
    pub coefficients: Vec<f64>,
    pub scores: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-x.abs()))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

fn linear_index(coefficients: &[f64], x: &[f64]) -> f64 {
    coefficients[0] + crate::linalg::dot(&coefficients[1..], x)
}

/// Binomial log-likelihood of the treatment indicator under a logistic
/// model with the given intercept and slopes.
pub fn log_likelihood(data: &Dataset, coefficients: &[f64]) -> f64 {
    (0..data.len())
        .map(|i| {
            let eta = linear_index(coefficients, data.covariates_of(i));
            if data.is_treated(i) {
                -softplus(-eta)
            } else {
                -softplus(eta)
            }
        })
        .sum()
}

/// Gradient of [`log_likelihood`] with respect to the coefficients.
pub fn log_likelihood_gradient(data: &Dataset, coefficients: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; coefficients.len()];
    for i in 0..data.len() {
        let x = data.covariates_of(i);
        let r = if data.is_treated(i) { 1.0 } else { 0.0 } - sigmoid(linear_index(coefficients, x));
        g[0] += r;
        crate::linalg::axpy(r, x, &mut g[1..]);
    }
    g
}

/// Maximum-likelihood logistic regression of treatment on the covariates by
/// damped Newton iterations.
///
/// Covariates are standardized internally. A covariate that is constant
/// across all units carries no information and gets slope 0.
pub fn fit_propensity_logistic(data: &Dataset) -> Result<PropensityFit> {
    let n = data.len();
    let p = data.n_covariates();
    let nf = n as f64;

    let mut used = Vec::new();
    let mut center = Vec::new();
    let mut scale = Vec::new();
    for j in 0..p {
        let col = data.covariate_column(j);
        let sd = libm::sqrt(stats::sample_variance(&col));
        if sd > 0.0 {
            used.push(j);
            center.push(stats::mean(col.iter().copied()));
            scale.push(sd);
        }
    }
    let k = used.len() + 1;
    let mut z = Matrix::zeros(n, k);
    for i in 0..n {
        z.set(i, 0, 1.0);
        for (c, &j) in used.iter().enumerate() {
            z.set(i, c + 1, (data.covariate(i, j) - center[c]) / scale[c]);
        }
    }
    if let Err(Error::RankDeficient { columns }) = Qr::factor(&z) {
        let columns = columns
            .into_iter()
            .map(|c| if c == 0 { 0 } else { used[c - 1] + 1 })
            .collect();
        return Err(Error::RankDeficient { columns });
    }
    let label: Vec<f64> = (0..n)
        .map(|i| if data.is_treated(i) { 1.0 } else { 0.0 })
        .collect();

    let loglik = |beta: &[f64]| -> f64 {
        (0..n)
            .map(|i| {
                let eta = crate::linalg::dot(z.row(i), beta);
                if label[i] > 0.5 {
                    -softplus(-eta)
                } else {
                    -softplus(eta)
                }
            })
            .sum()
    };

    let frac = data.n_treated() as f64 / nf;
    let mut beta = vec![0.0; k];
    beta[0] = libm::log(frac / (1.0 - frac));
    let mut current = loglik(&beta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let mut grad = vec![0.0; k];
        let mut hess = Matrix::zeros(k, k);
        for i in 0..n {
            let row = z.row(i);
            let pr = sigmoid(crate::linalg::dot(row, &beta));
            crate::linalg::axpy((label[i] - pr) / nf, row, &mut grad);
            let w = pr * (1.0 - pr) / nf;
            for a in 0..k {
                for b in a..k {
                    let v = hess.get(a, b) + w * row[a] * row[b];
                    hess.set(a, b, v);
                }
            }
        }
        if grad.iter().all(|g| g.abs() <= GRADIENT_TOLERANCE) {
            converged = true;
            break;
        }
        for a in 0..k {
            for b in 0..a {
                hess.set(a, b, hess.get(b, a));
            }
        }
        iterations += 1;
        let step = PivotedCholesky::factor(&hess, 1e-15).solve(&grad);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let value = loglik(&trial);
            if value > current {
                beta = trial;
                current = value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        let slope_norm = libm::sqrt(beta[1..].iter().map(|b| b * b).sum::<f64>());
        if slope_norm > SEPARATION_NORM {
            let mut direction = vec![0.0; p];
            for (c, &j) in used.iter().enumerate() {
                direction[j] = beta[c + 1] / slope_norm;
            }
            return Err(Error::Separation { direction });
        }
        if !accepted {
            // no ascent left at machine precision
            break;
        }
    }

    let mut coefficients = vec![0.0; p + 1];
    coefficients[0] = beta[0];
    for (c, &j) in used.iter().enumerate() {
        coefficients[j + 1] = beta[c + 1] / scale[c];
        coefficients[0] -= beta[c + 1] * center[c] / scale[c];
    }
    let scores = (0..n)
        .map(|i| {
            sigmoid(linear_index(&coefficients, data.covariates_of(i)))
                .clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
        })
        .collect();
    Ok(PropensityFit {
        coefficients,
        scores,
        converged,
        iterations,
    })
}

/// Inverse-odds weights for the ATT: treated units weigh 1, each control
/// weighs its odds `e/(1−e)`, renormalized so control weights sum to `n_c`.
pub fn ipw_att_weights(fit: &PropensityFit, data: &Dataset) -> Result<WeightVector> {
    if fit.scores.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: fit.scores.len(),
        });
    }
    let controls = data.group_indices(Group::Control);
    let mut w = vec![1.0; data.len()];
    let mut total = 0.0;
    for &i in controls {
        let e = fit.scores[i];
        if !(e > 0.0 && e < 1.0 - UNBOUNDED_SCORE) {
            return Err(Error::UnboundedWeight {
                id: data.id(i).into(),
                score: e,
            });
        }
        w[i] = e / (1.0 - e);
        total += w[i];
    }
    let scale = controls.len() as f64 / total;
    for &i in controls {
        w[i] *= scale;
    }
    WeightVector::new(data, w, Method::Ipw)
}
