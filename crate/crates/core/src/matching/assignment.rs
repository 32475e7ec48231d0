use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::implied::{Method, WeightVector};
use crate::linalg::Matrix;
use crate::model::{Dataset, Group};

use super::{DistanceMatrix, MatchResult};

/// Minimum-cost assignment of every row to a distinct column (`rows ≤
/// cols`) by successive shortest augmenting paths with node potentials.
///
/// Returns the column assigned to each row. Among equal-cost choices the
/// lowest column index wins.
pub fn solve_assignment(cost: &Matrix) -> Result<Vec<usize>> {
    let (n, m) = (cost.rows(), cost.cols());
    if n > m {
        return Err(Error::TooFewControls {
            treated: n,
            controls: m,
        });
    }
    // 1-based with index 0 as the virtual source column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assigned = vec![0usize; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assigned[owner[j] - 1] = j - 1;
        }
    }
    Ok(assigned)
}

/// Optimal 1:1 matching without replacement of every treated unit to a
/// distinct control, minimizing the total distance.
///
/// Units enter the solver in id order, so ties resolve toward
/// lexicographically smaller ids. Matched controls share the control
/// weight mass `n_c` equally; unmatched controls get 0.
pub fn optimal_pair_match(data: &Dataset, d: &DistanceMatrix) -> Result<MatchResult> {
    let treated = data.group_indices(Group::Treated);
    let controls = data.group_indices(Group::Control);
    if d.entries.rows() != treated.len() || d.entries.cols() != controls.len() {
        return Err(Error::DimensionMismatch {
            expected: treated.len() * controls.len(),
            found: d.entries.rows() * d.entries.cols(),
        });
    }
    if treated.len() > controls.len() {
        return Err(Error::TooFewControls {
            treated: treated.len(),
            controls: controls.len(),
        });
    }
    let by_id = |idx: &[usize]| {
        let mut order: Vec<usize> = (0..idx.len()).collect();
        order.sort_by(|&a, &b| data.id(idx[a]).cmp(data.id(idx[b])));
        order
    };
    let t_order = by_id(treated);
    let c_order = by_id(controls);
    let mut cost = Matrix::zeros(t_order.len(), c_order.len());
    for (r, &tr) in t_order.iter().enumerate() {
        for (c, &cc) in c_order.iter().enumerate() {
            cost.set(r, c, d.entries.get(tr, cc));
        }
    }
    let assigned = solve_assignment(&cost)?;

    let nt = treated.len() as f64;
    let nc = controls.len() as f64;
    let mut w = vec![1.0; data.len()];
    for &i in controls {
        w[i] = 0.0;
    }
    let mut pairs = Vec::with_capacity(assigned.len());
    let mut selected: Vec<String> = Vec::with_capacity(assigned.len());
    let mut total = 0.0;
    for (r, &c) in assigned.iter().enumerate() {
        let ti = treated[t_order[r]];
        let ci = controls[c_order[c]];
        total += cost.get(r, c);
        w[ci] = nc / nt;
        pairs.push((String::from(data.id(ti)), String::from(data.id(ci))));
        selected.push(String::from(data.id(ci)));
    }
    selected.sort();
    Ok(MatchResult {
        pairs,
        selected_controls: selected,
        total_distance: total,
        weights: WeightVector::new(data, w, Method::PairMatch)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_dominance() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(solve_assignment(&m).unwrap(), vec![0, 1]);
    }

    #[test]
    fn nearest_neighbour_for_single_row() {
        let m = Matrix::from_rows(&[vec![5.0, 1.0, 3.0]]).unwrap();
        assert_eq!(solve_assignment(&m).unwrap(), vec![1]);
    }

    #[test]
    fn ties_take_lowest_column() {
        let m = Matrix::from_rows(&[vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 1.0]]).unwrap();
        let a = solve_assignment(&m).unwrap();
        let mut cols = a.clone();
        cols.sort();
        assert_eq!(cols, vec![0, 1]);
    }

    #[test]
    fn too_many_rows() {
        let m = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(
            solve_assignment(&m),
            Err(Error::TooFewControls { .. })
        ));
    }
}
