//! Shared oracle helpers for integration tests. These deliberately avoid the
//! crate's own linear algebra so checks stay independent of the code paths
//! they verify.

#![allow(dead_code)]

use ndarray::{Array1, Array2};

pub fn pearson(x: &Array1<f64>, y: &Array1<f64>) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.sum() / n;
    let my = y.sum() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y.iter()) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// Optimal one-to-one assignment of recovered rows to truth rows maximizing
/// the total matched |correlation| (exhaustive over permutations; fine for
/// the small component counts used in tests). Returns the matched
/// |correlation| per truth row.
pub fn permutation_match(recovered: &Array2<f64>, truth: &Array2<f64>) -> Vec<f64> {
    let k = truth.nrows();
    assert_eq!(recovered.nrows(), k, "need equal source counts");
    let mut corr = vec![vec![0.0f64; k]; k];
    for i in 0..k {
        for j in 0..k {
            corr[i][j] = pearson(
                &truth.row(i).to_owned(),
                &recovered.row(j).to_owned(),
            )
            .abs();
        }
    }
    let mut assignment = vec![0usize; k];
    let mut best_total = f64::MIN;
    let mut best = vec![0usize; k];
    permute(&mut assignment, &mut vec![false; k], 0, &corr, &mut best_total, &mut best);
    (0..k).map(|i| corr[i][best[i]]).collect()
}

fn permute(
    assignment: &mut Vec<usize>,
    used: &mut Vec<bool>,
    row: usize,
    corr: &[Vec<f64>],
    best_total: &mut f64,
    best: &mut Vec<usize>,
) {
    let k = corr.len();
    if row == k {
        let total: f64 = (0..k).map(|i| corr[i][assignment[i]]).sum();
        if total > *best_total {
            *best_total = total;
            best.clone_from(assignment);
        }
        return;
    }
    for j in 0..k {
        if !used[j] {
            used[j] = true;
            assignment[row] = j;
            permute(assignment, used, row + 1, corr, best_total, best);
            used[j] = false;
        }
    }
}

/// Numerical rank by row-wise Gram-Schmidt: count rows whose residual norm
/// after projecting out previous rows exceeds `tol * largest_row_norm`.
pub fn numerical_rank(m: &Array2<f64>, tol: f64) -> usize {
    let mut basis: Vec<Array1<f64>> = Vec::new();
    let max_norm = m
        .outer_iter()
        .map(|r| r.dot(&r).sqrt())
        .fold(0.0f64, f64::max);
    if max_norm == 0.0 {
        return 0;
    }
    for row in m.outer_iter() {
        let mut v = row.to_owned();
        for _ in 0..2 {
            for b in &basis {
                let proj = v.dot(b);
                v.scaled_add(-proj, b);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm > tol * max_norm {
            basis.push(v / norm);
        }
    }
    basis.len()
}
