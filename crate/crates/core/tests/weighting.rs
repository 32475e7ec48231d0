#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use contrastkit_core::weighting::{log_likelihood, log_likelihood_gradient, sbw_solve_detailed};
use contrastkit_core::{
    balance_table, fit_propensity_logistic, ipw_att_weights, sbw_solve, weight_variance, Dataset,
    Error, Group, Method, SbwConfig, WeightVector,
};
use rand::Rng;

#[test]
fn logistic_gradient_matches_finite_differences() {
    let mut r = rng(20);
    let d = random_dataset(&mut r, 80, 3);
    for _ in 0..10 {
        let beta: Vec<f64> = (0..4).map(|_| normal(&mut r)).collect();
        let g = log_likelihood_gradient(&d, &beta);
        for k in 0..4 {
            let h = 1e-5;
            let mut up = beta.clone();
            let mut down = beta.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (log_likelihood(&d, &up) - log_likelihood(&d, &down)) / (2.0 * h);
            assert!(
                (fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1.0),
                "{fd} vs {}",
                g[k]
            );
        }
    }
}

#[test]
fn logistic_fit_matches_grid_search() {
    let d = build(
        vec![true, false, true, false, true, false],
        vec![
            vec![0.3],
            vec![-0.5],
            vec![1.2],
            vec![0.8],
            vec![-0.1],
            vec![-1.4],
        ],
        vec![0.0; 6],
    );
    let fit = fit_propensity_logistic(&d).unwrap();
    assert!(fit.converged);
    let (b0, b1) = (fit.coefficients[0], fit.coefficients[1]);
    let step = 1e-3;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for a in -500..=500 {
        for b in -500..=500 {
            let c = [b0 + a as f64 * step, b1 + b as f64 * step];
            let ll = log_likelihood(&d, &c);
            if ll > best.0 {
                best = (ll, c[0], c[1]);
            }
        }
    }
    assert!((best.1 - b0).abs() <= step && (best.2 - b1).abs() <= step);
    assert!(log_likelihood(&d, &fit.coefficients) >= best.0 - 1e-12);
}

#[test]
fn rank_deficient_propensity_design() {
    let rows: Vec<Vec<f64>> = (0..8)
        .map(|i| vec![i as f64, 2.0 * i as f64 + 1.0])
        .collect();
    let d = build((0..8).map(|i| i % 2 == 0).collect(), rows, vec![0.0; 8]);
    assert!(matches!(
        fit_propensity_logistic(&d),
        Err(Error::RankDeficient { .. })
    ));
}

/// Two covariates, treatment drawn from a known logistic model.
fn logistic_sample(r: &mut rand_pcg::Pcg64, n: usize) -> Dataset {
    let mut treated = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let x = [normal(r), normal(r)];
        let eta = -0.5 + 0.8 * x[0] - 0.6 * x[1];
        let p = 1.0 / (1.0 + (-eta).exp());
        treated.push(r.gen::<f64>() < p);
        rows.push(x.to_vec());
    }
    build(treated, rows, vec![0.0; n])
}

#[test]
fn ipw_balances_under_a_correct_model() {
    let mut r = rng(21);
    let mut good = 0;
    for _ in 0..100 {
        let d = logistic_sample(&mut r, 2000);
        let w = ipw_att_weights(&fit_propensity_logistic(&d).unwrap(), &d).unwrap();
        let target = raw_means(&d, Group::Treated);
        if balance_table(&d, &w, &target).unwrap().max_abs_std_diff() < 0.1 {
            good += 1;
        }
    }
    assert!(good >= 95, "{good} of 100 replications balanced");
}

#[test]
fn ipw_is_shift_invariant() {
    let mut r = rng(22);
    let d = logistic_sample(&mut r, 300);
    let shifted: Vec<Vec<f64>> = (0..d.len())
        .map(|i| vec![d.covariate(i, 0) + 17.5, d.covariate(i, 1)])
        .collect();
    let d2 = build(d.treatment().to_vec(), shifted, d.outcomes().to_vec());
    let f1 = fit_propensity_logistic(&d).unwrap();
    let f2 = fit_propensity_logistic(&d2).unwrap();
    assert!((f1.coefficients[1] - f2.coefficients[1]).abs() < 1e-8);
    assert!((f1.coefficients[2] - f2.coefficients[2]).abs() < 1e-8);
    let w1 = ipw_att_weights(&f1, &d).unwrap();
    let w2 = ipw_att_weights(&f2, &d2).unwrap();
    for (a, b) in w1.weights().iter().zip(w2.weights()) {
        assert!((a - b).abs() <= 1e-8);
    }
}

fn sbw_instance(r: &mut rand_pcg::Pcg64, n_t: usize, n_c: usize, p: usize) -> Dataset {
    let mut rows = Vec::new();
    let mut treated = Vec::new();
    for i in 0..n_t + n_c {
        let t = i < n_t;
        let row: Vec<f64> = (0..p)
            .map(|_| normal(r) + if t { 0.5 } else { 0.0 })
            .collect();
        rows.push(row);
        treated.push(t);
    }
    let y = (0..n_t + n_c).map(|_| normal(r)).collect();
    build(treated, rows, y)
}

/// Smallest `Σ (π_i − 1/n)²` over the simplex grid `π_i ∈ {0, h, 2h, …}`
/// with `Σ π_i = 1`, subject to the balance constraint.
fn grid_oracle(x: &[f64], target: f64, bound: f64, steps: usize) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn walk(
        x: &[f64],
        k: usize,
        left: usize,
        steps: usize,
        sx: f64,
        sq: f64,
        target: f64,
        bound: f64,
        best: &mut f64,
    ) {
        let h = 1.0 / steps as f64;
        if k == x.len() - 1 {
            let pi = left as f64 * h;
            let sx = sx + pi * x[k];
            let sq = sq + pi * pi;
            if (sx - target).abs() <= bound && sq < *best {
                *best = sq;
            }
            return;
        }
        for c in 0..=left {
            let pi = c as f64 * h;
            walk(
                x,
                k + 1,
                left - c,
                steps,
                sx + pi * x[k],
                sq + pi * pi,
                target,
                bound,
                best,
            );
        }
    }
    let mut best = f64::INFINITY;
    walk(x, 0, steps, steps, 0.0, 0.0, target, bound, &mut best);
    best - 1.0 / x.len() as f64
}

#[test]
fn sbw_matches_grid_search() {
    let mut r = rng(23);
    let mut checked = 0;
    for _ in 0..4 {
        let d = sbw_instance(&mut r, 5, 6, 1);
        let target = raw_means(&d, Group::Treated);
        let delta = 0.05;
        let sol = match sbw_solve_detailed(&d, &target, &SbwConfig::with_delta(vec![delta])) {
            Ok(s) => s,
            Err(Error::SbwInfeasible { .. }) => continue,
            Err(e) => panic!("{e:?}"),
        };
        let xs: Vec<f64> = d
            .group_indices(Group::Control)
            .iter()
            .map(|&i| d.covariate(i, 0))
            .collect();
        let bound = delta * d.pooled_sd(0);
        let oracle = grid_oracle(&xs, target[0], bound, 100);
        // the solver reports the variance of w = n π
        let objective = sol.objective / xs.len() as f64;
        assert!(
            oracle >= objective - 1e-12,
            "grid beat the solver: {oracle} < {objective}"
        );
        assert!(
            oracle - objective <= 1e-3,
            "grid {oracle} vs solver {objective}"
        );
        checked += 1;
    }
    assert!(checked >= 2);
}

#[test]
fn sbw_certificates_and_non_negativity() {
    let mut r = rng(24);
    let mut solved = 0;
    for _ in 0..60 {
        let p = r.gen_range(1..=4);
        let n_c = r.gen_range(10..=150);
        let n_t = r.gen_range(5..=80);
        let d = sbw_instance(&mut r, n_t, n_c, p);
        let target = raw_means(&d, Group::Treated);
        let delta = [0.0, 0.01, 0.02, 0.1][r.gen_range(0..4)];
        match sbw_solve_detailed(&d, &target, &SbwConfig::with_delta(vec![delta])) {
            Ok(sol) => {
                solved += 1;
                assert!(
                    sol.kkt_residual <= 1e-6,
                    "kkt residual {}",
                    sol.kkt_residual
                );
                assert!(sol.weights.weights().iter().all(|&w| w >= 0.0));
                assert!(sol.achieved_imbalance.iter().all(|&a| a <= delta + 1e-7));
                let w = &sol.weights;
                let c = weighted_means(&d, w, Group::Control);
                for j in 0..p {
                    assert!((c[j] - target[j]).abs() <= delta * d.pooled_sd(j) + 1e-7);
                }
                assert!((weight_variance(w, Group::Control) - sol.objective).abs() < 1e-12);
            }
            Err(Error::SbwInfeasible {
                min_delta,
                uniform_delta,
            }) => {
                assert!(
                    min_delta.iter().all(|&m| m > delta || m.is_nan()) || uniform_delta > delta
                );
            }
            Err(e) => panic!("{e:?}"),
        }
    }
    assert!(solved > 30);
}

#[test]
fn sbw_infinite_delta_is_exactly_uniform() {
    let mut r = rng(25);
    let d = sbw_instance(&mut r, 20, 40, 3);
    let w = sbw_solve(
        &d,
        &raw_means(&d, Group::Treated),
        &SbwConfig::with_delta(vec![f64::INFINITY]),
    )
    .unwrap();
    assert!(w.weights().iter().all(|&x| x == 1.0));
}

#[test]
fn sbw_zero_delta_unique_point() {
    let d = build(
        vec![true, true, false, false],
        vec![vec![0.0], vec![0.5], vec![0.0], vec![1.0]],
        vec![0.0; 4],
    );
    let w = sbw_solve(&d, &[0.25], &SbwConfig::with_delta(vec![0.0])).unwrap();
    assert!((w.weights()[2] - 1.5).abs() < 1e-8 && (w.weights()[3] - 0.5).abs() < 1e-8);
}

fn feasible(d: &Dataset, w: &[f64], target: &[f64], delta: f64) -> bool {
    let idx = d.group_indices(Group::Control);
    let n = idx.len() as f64;
    (0..d.n_covariates()).all(|j| {
        let m: f64 = idx.iter().map(|&i| w[i] * d.covariate(i, j)).sum::<f64>() / n;
        (m - target[j]).abs() <= delta * d.pooled_sd(j)
    })
}

#[test]
fn sbw_dominates_sampled_feasible_weights() {
    let mut r = rng(26);
    for _ in 0..10 {
        let d = sbw_instance(&mut r, 30, 60, 2);
        let target = raw_means(&d, Group::Treated);
        let delta = 0.05;
        let Ok(star) = sbw_solve(&d, &target, &SbwConfig::with_delta(vec![delta])) else {
            continue;
        };
        let base = weight_variance(&star, Group::Control);
        let idx = d.group_indices(Group::Control);
        // tighter solutions are feasible too; mixing with them stays feasible
        let tight: Vec<WeightVector> = [0.0, 0.01, 0.03]
            .iter()
            .filter_map(|&t| sbw_solve(&d, &target, &SbwConfig::with_delta(vec![t])).ok())
            .collect();
        let support: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| star.weights()[i] > 0.0)
            .collect();
        let basis: Vec<Vec<f64>> = support
            .iter()
            .map(|&i| {
                std::iter::once(1.0)
                    .chain(d.covariates_of(i).iter().copied())
                    .collect()
            })
            .collect();
        let mut checked = 0;
        for k in 0..50 {
            let mut cand = star.weights().to_vec();
            if k % 2 == 0 && !tight.is_empty() {
                let other = &tight[k / 2 % tight.len()];
                let t: f64 = r.gen();
                for &i in idx {
                    cand[i] = (1.0 - t) * cand[i] + t * other.weights()[i];
                }
            } else {
                // move within the balance-preserving directions on the support
                let v: Vec<f64> = support.iter().map(|_| normal(&mut r)).collect();
                let delta_w = project_out(&basis, &v);
                let mut step = f64::INFINITY;
                for (k, &i) in support.iter().enumerate() {
                    if delta_w[k] < 0.0 {
                        step = step.min(-star.weights()[i] / delta_w[k]);
                    }
                }
                let s = step.min(1.0) * r.gen::<f64>();
                for (k, &i) in support.iter().enumerate() {
                    cand[i] = (cand[i] + s * delta_w[k]).max(0.0);
                }
            }
            let cand = WeightVector::new(&d, cand, Method::Sbw).unwrap();
            assert!(feasible(&d, cand.weights(), &target, delta * (1.0 + 1e-9)));
            assert!(weight_variance(&cand, Group::Control) >= base - 1e-12);
            checked += 1;
        }
        assert_eq!(checked, 50);
    }
}
