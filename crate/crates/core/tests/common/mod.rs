#![allow(dead_code)]

use contrastkit_core::{Dataset, Group, WeightVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rand_pcg::Pcg64;

pub fn rng(seed: u64) -> Pcg64 {
    Pcg64::new(
        0xcafe_f00d_d15e_a5e5 ^ seed as u128,
        0xa02b_dbf7_bb3c_0a7a_c28f_a16a_64ab_f96d,
    )
}

pub fn normal(rng: &mut Pcg64) -> f64 {
    rng.sample(StandardNormal)
}

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("u{i:04}")).collect()
}

pub fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

pub fn build(treated: Vec<bool>, rows: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
    let p = rows[0].len();
    Dataset::new(ids(treated.len()), treated, rows, y, names(p)).unwrap()
}

/// Normal covariates with a group mean shift and correlated columns;
/// both groups have at least `p + 3` units.
pub fn random_dataset(rng: &mut Pcg64, n: usize, p: usize) -> Dataset {
    let n = n.max(2 * (p + 3));
    let n_t = rng.gen_range(p + 3..=n - (p + 3));
    let mut treated: Vec<bool> = (0..n).map(|i| i < n_t).collect();
    // interleave groups so index order does not encode treatment
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        treated.swap(i, j);
    }
    let shift: Vec<f64> = (0..p).map(|_| normal(rng)).collect();
    let rows: Vec<Vec<f64>> = treated
        .iter()
        .map(|&t| {
            let mut r: Vec<f64> = (0..p).map(|_| normal(rng)).collect();
            for j in 1..p {
                r[j] += 0.5 * r[j - 1];
            }
            if t {
                for j in 0..p {
                    r[j] += shift[j];
                }
            }
            r
        })
        .collect();
    let y = (0..n).map(|_| normal(rng)).collect();
    build(treated, rows, y)
}

pub fn weighted_means(data: &Dataset, w: &WeightVector, g: Group) -> Vec<f64> {
    let idx = data.group_indices(g);
    (0..data.n_covariates())
        .map(|j| {
            idx.iter()
                .map(|&i| w.weights()[i] * data.covariate(i, j))
                .sum::<f64>()
                / idx.len() as f64
        })
        .collect()
}

pub fn raw_means(data: &Dataset, g: Group) -> Vec<f64> {
    let idx = data.group_indices(g);
    (0..data.n_covariates())
        .map(|j| idx.iter().map(|&i| data.covariate(i, j)).sum::<f64>() / idx.len() as f64)
        .collect()
}

pub fn contrast(data: &Dataset, w: &[f64], y: &[f64]) -> f64 {
    let part = |g: Group| {
        let idx = data.group_indices(g);
        idx.iter().map(|&i| w[i] * y[i]).sum::<f64>() / idx.len() as f64
    };
    part(Group::Treated) - part(Group::Control)
}

/// Solves a square system by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// Numerical rank by Gaussian elimination with full pivoting.
pub fn gauss_rank(mut a: Vec<Vec<f64>>, tol: f64) -> usize {
    let rows = a.len();
    let cols = a[0].len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rank = 0;
    let mut used_cols = vec![false; cols];
    for r in 0..rows.min(cols) {
        let mut best = (0.0, 0, 0);
        for i in r..rows {
            for j in 0..cols {
                if !used_cols[j] && a[i][j].abs() > best.0 {
                    best = (a[i][j].abs(), i, j);
                }
            }
        }
        if best.0 <= tol * scale {
            break;
        }
        let (_, pi, pj) = best;
        a.swap(r, pi);
        used_cols[pj] = true;
        for i in r + 1..rows {
            let f = a[i][pj] / a[r][pj];
            for j in 0..cols {
                a[i][j] -= f * a[r][j];
            }
        }
        rank += 1;
    }
    rank
}

/// Component of `v` orthogonal to the columns of `basis` (rows are units).
pub fn project_out(basis: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let k = basis[0].len();
    let mut gram = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for (row, vi) in basis.iter().zip(v) {
        for a in 0..k {
            rhs[a] += row[a] * vi;
            for b in 0..k {
                gram[a][b] += row[a] * row[b];
            }
        }
    }
    let coef = gauss_solve(gram, rhs);
    let mut out: Vec<f64> = basis
        .iter()
        .zip(v)
        .map(|(row, vi)| vi - row.iter().zip(&coef).map(|(x, c)| x * c).sum::<f64>())
        .collect();
    // second pass for accuracy
    let mut gram = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for (row, vi) in basis.iter().zip(&out) {
        for a in 0..k {
            rhs[a] += row[a] * vi;
            for b in 0..k {
                gram[a][b] += row[a] * row[b];
            }
        }
    }
    let coef = gauss_solve(gram, rhs);
    for (o, row) in out.iter_mut().zip(basis) {
        *o -= row.iter().zip(&coef).map(|(x, c)| x * c).sum::<f64>();
    }
    out
}

pub fn variance(w: &[f64]) -> f64 {
    let m = w.iter().sum::<f64>() / w.len() as f64;
    w.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / w.len() as f64
}
