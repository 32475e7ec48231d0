use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::implied::{Method, WeightVector};
use crate::model::{Dataset, Group};

use super::MatchResult;

/// Largest control group solved exactly.
pub const MAX_EXACT_CONTROLS: usize = 500;

/// Default balance tolerance, in pooled standard deviations.
pub const DEFAULT_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ToleranceScale {
    /// Tolerances are multiples of each covariate's pooled standard deviation.
    #[default]
    PooledSd,
    /// Tolerances are in the covariates' own units.
    Absolute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileMatchOptions {
    /// One tolerance per covariate, or a single value for all of them.
    /// `f64::INFINITY` leaves a covariate unconstrained.
    pub tolerance: Vec<f64>,
    pub scale: ToleranceScale,
    pub max_controls: usize,
    /// Search nodes explored before giving up.
    pub node_limit: u64,
    /// Wall-clock budget in seconds; only enforced with the `std` feature.
    pub time_limit: f64,
}

impl Default for ProfileMatchOptions {
    fn default() -> Self {
        ProfileMatchOptions {
            tolerance: vec![DEFAULT_TOLERANCE],
            scale: ToleranceScale::PooledSd,
            max_controls: MAX_EXACT_CONTROLS,
            node_limit: 20_000_000,
            time_limit: 10.0,
        }
    }
}

impl ProfileMatchOptions {
    pub fn with_tolerance(tolerance: Vec<f64>, scale: ToleranceScale) -> Self {
        ProfileMatchOptions {
            tolerance,
            scale,
            ..Default::default()
        }
    }
}

/// Covariate offsets from the target in tolerance-scale units, one row per
/// control, with the constrained coordinates only.
struct Instance {
    d: Vec<Vec<f64>>,
    tau: Vec<f64>,
}

impl Instance {
    fn feasible(&self, sums: &[f64], count: usize) -> bool {
        if count == 0 {
            return false;
        }
        let c = count as f64;
        sums.iter()
            .zip(&self.tau)
            .all(|(s, t)| s.abs() <= t * c + 1e-12 * c * (1.0 + t))
    }

    /// Surrogate item values `λ·d_i − Σ|λ_j|τ_j`.
    fn surrogate(&self, lambda: &[f64]) -> Vec<f64> {
        let shift: f64 = lambda.iter().zip(&self.tau).map(|(l, t)| l.abs() * t).sum();
        self.d
            .iter()
            .map(|d| d.iter().zip(lambda).map(|(x, l)| x * l).sum::<f64>() - shift)
            .collect()
    }
}

/// A single aggregated constraint `Σ_{i∈S} a_i ≤ 0` with its items sorted.
struct Direction {
    lambda: Vec<f64>,
    values: Vec<f64>,
    order: Vec<usize>,
    shift: f64,
}

impl Direction {
    fn new(inst: &Instance, lambda: Vec<f64>) -> Direction {
        let values = inst.surrogate(&lambda);
        let shift = lambda.iter().zip(&inst.tau).map(|(l, t)| l.abs() * t).sum();
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| {
            values[a]
                .partial_cmp(&values[b])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        Direction {
            lambda,
            values,
            order,
            shift,
        }
    }

    /// Most items still open that can join a set with the given sums under
    /// this constraint, or `None` when no completion satisfies it.
    fn bound(&self, sums: &[f64], count: usize, open: &[bool]) -> Option<usize> {
        let used: f64 = sums
            .iter()
            .zip(&self.lambda)
            .map(|(s, l)| s * l)
            .sum::<f64>()
            - self.shift * count as f64;
        let slack = 1e-9 * (1.0 + used.abs());
        let mut total = used;
        let mut best = if total <= slack { Some(0) } else { None };
        let mut k = 0;
        for &i in &self.order {
            if !open[i] {
                continue;
            }
            k += 1;
            total += self.values[i];
            if total <= slack {
                best = Some(k);
            }
        }
        best
    }
}

/// Linear-relaxation value at the root, used to pick a strong direction.
fn relaxed_value(values: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mut total = 0.0;
    let mut count = 0.0;
    for v in sorted {
        if total + v <= 0.0 {
            total += v;
            count += 1.0;
        } else {
            if v > 0.0 {
                count += -total / v;
            }
            break;
        }
    }
    count
}

fn tuned_direction(inst: &Instance) -> Vec<f64> {
    let m = inst.tau.len();
    let n = inst.d.len() as f64;
    let mut lambda: Vec<f64> = (0..m)
        .map(|j| inst.d.iter().map(|d| d[j]).sum::<f64>() / n)
        .collect();
    let norm = libm::sqrt(lambda.iter().map(|l| l * l).sum::<f64>());
    if norm == 0.0 {
        lambda = vec![0.0; m];
        lambda[0] = 1.0;
    } else {
        lambda.iter_mut().for_each(|l| *l /= norm);
    }
    let value = |lam: &[f64]| relaxed_value(&inst.surrogate(lam));
    let mut current = value(&lambda);
    let mut step = 0.5;
    while step > 1e-4 {
        let mut improved = false;
        for j in 0..m {
            for sign in [1.0, -1.0] {
                let mut trial = lambda.clone();
                trial[j] += sign * step;
                let nrm = libm::sqrt(trial.iter().map(|l| l * l).sum::<f64>());
                if nrm == 0.0 {
                    continue;
                }
                trial.iter_mut().for_each(|l| *l /= nrm);
                let v = value(&trial);
                if v < current - 1e-12 {
                    current = v;
                    lambda = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    lambda
}

struct Budget {
    nodes: u64,
    limit: u64,
    #[cfg(feature = "std")]
    deadline: Option<std::time::Instant>,
}

impl Budget {
    fn spend(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes > self.limit {
            return false;
        }
        #[cfg(feature = "std")]
        if self.nodes.is_multiple_of(4096) {
            if let Some(deadline) = self.deadline {
                if std::time::Instant::now() > deadline {
                    return false;
                }
            }
        }
        true
    }
}

struct Search<'a> {
    inst: &'a Instance,
    dirs: Vec<Direction>,
    branch: Vec<usize>,
    open: Vec<bool>,
    chosen: Vec<bool>,
    best: Vec<bool>,
    best_count: usize,
    budget: Budget,
}

impl Search<'_> {
    fn visit(&mut self, depth: usize, sums: &mut Vec<f64>, count: usize) -> bool {
        if !self.budget.spend() {
            return false;
        }
        if count > self.best_count && self.inst.feasible(sums, count) {
            self.best_count = count;
            self.best.clone_from(&self.chosen);
        }
        let mut extra = self.open.iter().filter(|&&o| o).count();
        for dir in &self.dirs {
            match dir.bound(sums, count, &self.open) {
                Some(b) => extra = extra.min(b),
                None => return true,
            }
        }
        if count + extra <= self.best_count || depth == self.branch.len() {
            return true;
        }
        let item = self.branch[depth];
        self.open[item] = false;

        self.chosen[item] = true;
        for (s, x) in sums.iter_mut().zip(&self.inst.d[item]) {
            *s += x;
        }
        let ok = self.visit(depth + 1, sums, count + 1);
        for (s, x) in sums.iter_mut().zip(&self.inst.d[item]) {
            *s -= x;
        }
        self.chosen[item] = false;
        if !ok {
            return false;
        }

        let ok = self.visit(depth + 1, sums, count);
        self.open[item] = true;
        ok
    }
}

/// Largest set of controls whose covariate means are each within tolerance
/// of the target profile. Treated units are all kept; the retained controls
/// share the control weight mass equally.
///
/// The search is exact: depth-first branch-and-bound where each node is
/// bounded by greedy fill of aggregated constraints.
pub fn profile_match(
    data: &Dataset,
    target: &[f64],
    options: &ProfileMatchOptions,
) -> Result<MatchResult> {
    let p = data.n_covariates();
    if target.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: target.len(),
        });
    }
    let tol: Vec<f64> = match options.tolerance.len() {
        1 => vec![options.tolerance[0]; p],
        len if len == p => options.tolerance.clone(),
        len => {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: len,
            })
        }
    };
    if tol.iter().any(|t| t.is_nan() || *t < 0.0) {
        return Err(Error::InvalidData(
            "profile tolerances must be non-negative".into(),
        ));
    }
    if target.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidData("target profile must be finite".into()));
    }
    let controls = data.group_indices(Group::Control);
    if controls.len() > options.max_controls {
        return Err(Error::SizeLimit(alloc::format!(
            "{} controls exceed the exact-search cap of {}; subsample controls or loosen the tolerance",
            controls.len(),
            options.max_controls
        )));
    }

    // items in id order; equal-size optima go to the smallest ids
    let mut by_id: Vec<usize> = controls.to_vec();
    by_id.sort_by(|&a, &b| data.id(a).cmp(data.id(b)));

    let mut cols = Vec::new();
    let mut tau = Vec::new();
    for j in 0..p {
        if tol[j].is_infinite() {
            continue;
        }
        let scale = match options.scale {
            ToleranceScale::Absolute => 1.0,
            ToleranceScale::PooledSd => data.pooled_sd(j),
        };
        let (div, t) = if scale > 0.0 {
            (scale, tol[j])
        } else {
            (1.0, 0.0)
        };
        cols.push((j, div));
        tau.push(t);
    }
    let d: Vec<Vec<f64>> = by_id
        .iter()
        .map(|&i| {
            cols.iter()
                .map(|&(j, div)| (data.covariate(i, j) - target[j]) / div)
                .collect()
        })
        .collect();
    let inst = Instance { d, tau };
    let m = inst.tau.len();
    let n = by_id.len();

    let selected: Vec<bool> = if m == 0 {
        vec![true; n]
    } else {
        let mut dirs = Vec::with_capacity(2 * m + 1);
        let tuned = tuned_direction(&inst);
        dirs.push(Direction::new(&inst, tuned));
        for j in 0..m {
            for sign in [1.0, -1.0] {
                let mut lambda = vec![0.0; m];
                lambda[j] = sign;
                dirs.push(Direction::new(&inst, lambda));
            }
        }
        let branch = dirs[0].order.clone();

        // incumbent: longest feasible prefix of the branching order
        let mut best = vec![false; n];
        let mut best_count = 0;
        let mut sums = vec![0.0; m];
        for (k, &i) in branch.iter().enumerate() {
            for (s, x) in sums.iter_mut().zip(&inst.d[i]) {
                *s += x;
            }
            if inst.feasible(&sums, k + 1) {
                best_count = k + 1;
            }
        }
        for &i in &branch[..best_count] {
            best[i] = true;
        }

        let mut search = Search {
            inst: &inst,
            dirs,
            branch,
            open: vec![true; n],
            chosen: vec![false; n],
            best,
            best_count,
            budget: Budget {
                nodes: 0,
                limit: options.node_limit,
                #[cfg(feature = "std")]
                deadline: std::time::Instant::now().checked_add(
                    std::time::Duration::from_secs_f64(options.time_limit.clamp(0.0, 1e9)),
                ),
            },
        };
        let mut sums = vec![0.0; m];
        if !search.visit(0, &mut sums, 0) {
            return Err(Error::SizeLimit(alloc::format!(
                "profile matching search budget exhausted after {} nodes; loosen the tolerance",
                search.budget.nodes
            )));
        }
        if search.best_count == 0 {
            return Err(Error::NoFeasibleSubset);
        }
        search.best
    };

    let size = selected.iter().filter(|&&s| s).count();
    let share = controls.len() as f64 / size as f64;
    let mut w = vec![1.0; data.len()];
    for &i in controls {
        w[i] = 0.0;
    }
    let mut ids: Vec<String> = Vec::with_capacity(size);
    for (k, &i) in by_id.iter().enumerate() {
        if selected[k] {
            w[i] = share;
            ids.push(String::from(data.id(i)));
        }
    }
    Ok(MatchResult {
        pairs: Vec::new(),
        selected_controls: ids,
        total_distance: 0.0,
        weights: WeightVector::new(data, w, Method::ProfileMatch)?,
    })
}
