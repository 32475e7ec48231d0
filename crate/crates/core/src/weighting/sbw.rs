//! Stable balancing weights: the minimum-variance non-negative control
//! weights whose mean covariates stay within a tolerance of the target.
//!
//! With covariates standardized at the target, `z_ij = (x_ij − t_j) / s_j`,
//! the problem over control weights `w` is
//!
//! ```text
//!     minimize    ½ Σ (w_i − 1)²
//!     subject to  w ≥ 0,   Σ w_i = n,   |Σ w_i z_ij| ≤ n δ_j
//! ```
//!
//! Keeping `w ≥ 0` as a set constraint, the Lagrangian minimizer is the
//! projection `w_i = max(0, 1 − ν − Σ_j y_j z_ij)` and the dual
//!
//! ```text
//!     g(ν, y) = ½ n − ½ Σ w_i² − ν n − Σ_j n δ_j |y_j|
//! ```
//!
//! is a concave piecewise quadratic in `1 + p` variables. It is maximized by
//! an orthant-wise damped Newton method. Every KKT condition except primal
//! feasibility and complementarity of the balance rows holds by construction
//! of `w`, so the remaining residual (the dual pseudo-gradient) certifies
//! optimality. Weak duality bounds `g` by the largest possible primal
//! objective; exceeding it proves the constraints infeasible.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::implied::{Method, WeightVector};
use crate::linalg::{dot, Matrix, PivotedCholesky};
use crate::model::{Dataset, Group};

/// Default balance tolerance, in pooled standard deviations.
pub const DEFAULT_DELTA: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct SbwConfig {
    /// Per-covariate tolerances in pooled-sd units; a single entry applies
    /// to every covariate and `f64::INFINITY` drops the constraint.
    pub delta: Vec<f64>,
    pub max_iterations: usize,
    /// Bound on the scaled KKT residual and on the relative duality gap.
    pub tolerance: f64,
}

impl Default for SbwConfig {
    fn default() -> Self {
        SbwConfig {
            delta: vec![DEFAULT_DELTA],
            max_iterations: 500,
            tolerance: 1e-9,
        }
    }
}

impl SbwConfig {
    pub fn with_delta(delta: Vec<f64>) -> SbwConfig {
        SbwConfig {
            delta,
            ..SbwConfig::default()
        }
    }

    fn resolve(&self, p: usize) -> Result<Vec<f64>> {
        let d = match self.delta.len() {
            1 => vec![self.delta[0]; p],
            len if len == p => self.delta.clone(),
            len => {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: len,
                })
            }
        };
        if d.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::InvalidDesign(
                "balance tolerances must be non-negative".into(),
            ));
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbwSolution {
    pub weights: WeightVector,
    /// Within-group variance of the control weights.
    pub objective: f64,
    /// Largest of the sum-constraint and balance-row residuals, in mean
    /// (per-unit, standardized) units.
    pub kkt_residual: f64,
    /// Primal objective minus dual value, both as `½ Σ (w − 1)²`.
    pub duality_gap: f64,
    pub iterations: usize,
    /// Achieved `|weighted control mean − target| / s_j` per covariate.
    pub achieved_imbalance: Vec<f64>,
}

/// Solves for stable balancing weights on the control group; treated units
/// keep weight 1.
pub fn sbw_solve(data: &Dataset, target: &[f64], config: &SbwConfig) -> Result<WeightVector> {
    sbw_solve_detailed(data, target, config).map(|s| s.weights)
}

pub fn sbw_solve_detailed(
    data: &Dataset,
    target: &[f64],
    config: &SbwConfig,
) -> Result<SbwSolution> {
    let p = data.n_covariates();
    if target.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: target.len(),
        });
    }
    let delta = config.resolve(p)?;
    let problem = Problem::new(data, target, &delta);
    match problem.solve(config.max_iterations, config.tolerance) {
        Outcome::Solved(state) => {
            let controls = data.group_indices(Group::Control);
            let mut w = vec![1.0; data.len()];
            for (k, &i) in controls.iter().enumerate() {
                w[i] = state.w[k];
            }
            let n = problem.n as f64;
            let objective = state.w.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() / n;
            let achieved_imbalance = (0..p)
                .map(|j| {
                    let s: f64 = state
                        .w
                        .iter()
                        .zip(problem.z_row(j))
                        .map(|(a, b)| a * b)
                        .sum();
                    (s / n).abs()
                })
                .collect();
            Ok(SbwSolution {
                weights: WeightVector::new(data, w, Method::Sbw)?,
                objective,
                kkt_residual: state.residual,
                duality_gap: state.gap,
                iterations: state.iterations,
                achieved_imbalance,
            })
        }
        Outcome::Infeasible => Err(infeasibility_report(data, target, &delta)),
        Outcome::Stalled { iterations, trace } => Err(Error::NotConverged { iterations, trace }),
    }
}

struct Problem {
    n: usize,
    // standardized covariates, row-major p × n
    z: Vec<f64>,
    // rows with a finite tolerance, and their bounds n δ_j
    rows: Vec<usize>,
    bound: Vec<f64>,
}

struct State {
    nu: f64,
    y: Vec<f64>,
    w: Vec<f64>,
    value: f64,
    residual: f64,
    gap: f64,
    iterations: usize,
}

enum Outcome {
    Solved(State),
    Infeasible,
    Stalled { iterations: usize, trace: Vec<f64> },
}

impl Problem {
    fn new(data: &Dataset, target: &[f64], delta: &[f64]) -> Problem {
        let controls = data.group_indices(Group::Control);
        let n = controls.len();
        let p = data.n_covariates();
        let mut z = vec![0.0; p * n];
        for j in 0..p {
            let sd = data.pooled_sd(j);
            let s = if sd > 0.0 { sd } else { 1.0 };
            for (k, &i) in controls.iter().enumerate() {
                z[j * n + k] = (data.covariate(i, j) - target[j]) / s;
            }
        }
        let rows: Vec<usize> = (0..p).filter(|&j| delta[j].is_finite()).collect();
        let bound = rows.iter().map(|&j| n as f64 * delta[j]).collect();
        Problem { n, z, rows, bound }
    }

    fn z_row(&self, j: usize) -> &[f64] {
        &self.z[j * self.n..(j + 1) * self.n]
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    fn primal(&self, nu: f64, y: &[f64]) -> Vec<f64> {
        let mut v = vec![1.0 - nu; self.n];
        for (r, &j) in self.rows.iter().enumerate() {
            if y[r] != 0.0 {
                crate::linalg::axpy(-y[r], self.z_row(j), &mut v);
            }
        }
        v.iter_mut().for_each(|x| *x = x.max(0.0));
        v
    }

    fn dual_value(&self, nu: f64, y: &[f64], w: &[f64]) -> f64 {
        let n = self.n as f64;
        let penalty: f64 = y.iter().zip(&self.bound).map(|(a, b)| a.abs() * b).sum();
        0.5 * n - 0.5 * dot(w, w) - nu * n - penalty
    }

    /// Pseudo-gradient: the superdifferential element of least norm.
    fn pseudo_gradient(&self, y: &[f64], w: &[f64]) -> (f64, Vec<f64>) {
        let g_nu = w.iter().sum::<f64>() - self.n as f64;
        let g_y = self
            .rows
            .iter()
            .enumerate()
            .map(|(r, &j)| {
                let s = dot(w, self.z_row(j));
                let b = self.bound[r];
                if y[r] > 0.0 {
                    s - b
                } else if y[r] < 0.0 {
                    s + b
                } else if s > b {
                    s - b
                } else if s < -b {
                    s + b
                } else {
                    0.0
                }
            })
            .collect();
        (g_nu, g_y)
    }

    fn state(&self, nu: f64, y: Vec<f64>, iterations: usize) -> State {
        let w = self.primal(nu, &y);
        let value = self.dual_value(nu, &y, &w);
        let (g_nu, g_y) = self.pseudo_gradient(&y, &w);
        let n = self.n as f64;
        let residual = g_y.iter().fold(g_nu.abs(), |m, g| m.max(g.abs())) / n;
        let primal_obj = 0.5 * w.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>();
        State {
            nu,
            y,
            w,
            value,
            residual,
            gap: primal_obj - value,
            iterations,
        }
    }

    fn solve(&self, max_iterations: usize, tolerance: f64) -> Outcome {
        let n = self.n as f64;
        let m = self.m();
        // any feasible w has ½ Σ (w − 1)² ≤ ½ (n² − n)
        let primal_ceiling = 0.5 * (n * n - n);
        let mut st = self.state(0.0, vec![0.0; m], 0);
        let mut trace = Vec::new();
        for it in 0..max_iterations {
            trace.push(st.residual);
            if st.value > primal_ceiling * (1.0 + 1e-9) + 1e-9 {
                return Outcome::Infeasible;
            }
            let scale = 1.0 + st.w.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>();
            if st.residual <= tolerance && st.gap.abs() <= tolerance * scale {
                st.iterations = it;
                return Outcome::Solved(st);
            }
            let (g_nu, g_y) = self.pseudo_gradient(&st.y, &st.w);
            // free coordinates: ν, nonzero y, and zero y with a nonzero pseudo-gradient
            let free: Vec<usize> = (0..m)
                .filter(|&r| st.y[r] != 0.0 || g_y[r] != 0.0)
                .collect();
            let sign: Vec<f64> = (0..m)
                .map(|r| {
                    if st.y[r] != 0.0 {
                        st.y[r].signum()
                    } else {
                        g_y[r].signum()
                    }
                })
                .collect();
            let dim = free.len() + 1;
            let positive: Vec<usize> = (0..self.n).filter(|&i| st.w[i] > 0.0).collect();
            let coord = |a: usize, i: usize| {
                if a == 0 {
                    1.0
                } else {
                    self.z_row(self.rows[free[a - 1]])[i]
                }
            };
            let mut h = Matrix::zeros(dim, dim);
            for a in 0..dim {
                for b in a..dim {
                    let s: f64 = positive.iter().map(|&i| coord(a, i) * coord(b, i)).sum();
                    h.set(a, b, s);
                    h.set(b, a, s);
                }
            }
            let trace_h: f64 = (0..dim).map(|a| h.get(a, a)).sum::<f64>() / dim as f64;
            let reg = 1e-12 * trace_h.max(1.0);
            for a in 0..dim {
                h.set(a, a, h.get(a, a) + reg);
            }
            let mut grad = Vec::with_capacity(dim);
            grad.push(g_nu);
            grad.extend(free.iter().map(|&r| g_y[r]));
            let dir = PivotedCholesky::factor(&h, 0.0).solve(&grad);
            let slope = dot(&grad, &dir);

            let mut t = 1.0;
            let mut next = None;
            for _ in 0..80 {
                let nu = st.nu + t * dir[0];
                let mut y = st.y.clone();
                for (a, &r) in free.iter().enumerate() {
                    let cand = y[r] + t * dir[a + 1];
                    // stay in the current orthant unless the kink is absent
                    y[r] = if self.bound[r] > 0.0 && cand * sign[r] < 0.0 {
                        0.0
                    } else {
                        cand
                    };
                }
                let w = self.primal(nu, &y);
                let value = self.dual_value(nu, &y, &w);
                if value >= st.value + 1e-4 * t * slope.max(0.0)
                    && value > st.value - 1e-15 * st.value.abs()
                {
                    next = Some(self.state(nu, y, it + 1));
                    break;
                }
                t *= 0.5;
            }
            match next {
                Some(s) if s.value > st.value || s.residual < st.residual => st = s,
                _ => {
                    // no further ascent: accept if the certificate holds at a looser scale
                    if st.residual <= tolerance.max(1e-12) * 10.0 {
                        st.iterations = it;
                        return Outcome::Solved(st);
                    }
                    trace.push(st.residual);
                    return Outcome::Stalled {
                        iterations: it + 1,
                        trace,
                    };
                }
            }
        }
        trace.push(st.residual);
        Outcome::Stalled {
            iterations: max_iterations,
            trace,
        }
    }
}

fn feasible(data: &Dataset, target: &[f64], delta: &[f64]) -> bool {
    !matches!(
        Problem::new(data, target, delta).solve(500, 1e-7),
        Outcome::Infeasible
    )
}

/// Smallest feasible tolerance for each covariate with the others held at
/// their configured values, plus the smallest common tolerance, by bisection.
fn infeasibility_report(data: &Dataset, target: &[f64], delta: &[f64]) -> Error {
    let p = delta.len();
    let bisect = |make: &dyn Fn(f64) -> Vec<f64>, start: f64| -> f64 {
        let mut lo = start;
        let mut hi = (start * 2.0).max(1e-3);
        while !feasible(data, target, &make(hi)) {
            lo = hi;
            hi *= 4.0;
            if hi > 1e6 {
                return f64::INFINITY;
            }
        }
        for _ in 0..50 {
            if hi - lo <= 1e-6 * hi.max(1e-6) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if feasible(data, target, &make(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let min_delta = (0..p)
        .map(|j| {
            if !delta[j].is_finite() {
                return delta[j];
            }
            bisect(
                &|v| {
                    let mut d = delta.to_vec();
                    d[j] = v;
                    d
                },
                delta[j],
            )
        })
        .collect();
    let base = delta
        .iter()
        .copied()
        .filter(|d| d.is_finite())
        .fold(0.0, f64::max);
    let uniform_delta = bisect(
        &|v| {
            delta
                .iter()
                .map(|d| if d.is_finite() { v } else { *d })
                .collect()
        },
        base,
    );
    Error::SbwInfeasible {
        min_delta,
        uniform_delta,
    }
}
