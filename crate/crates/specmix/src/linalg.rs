//! Small dense linear algebra used throughout the crate.
//!
//! Sample counts in this domain are tens of rows, so the symmetric
//! eigenproblems and linear solves stay tiny. A cyclic Jacobi sweep and
//! Gaussian elimination are plenty and keep the crate free of BLAS/LAPACK
//! linkage.

use ndarray::{Array1, Array2, ArrayView1};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order with eigenvectors as matching
/// columns. Eigenvector signs are fixed so the entry of largest magnitude is
/// positive, which keeps downstream output deterministic.
pub(crate) fn sym_eig(mat: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = mat.nrows();
    assert_eq!(n, mat.ncols(), "sym_eig needs a square matrix");
    let mut a = mat.clone();
    let mut v = Array2::<f64>::eye(n);

    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-15 * frob.max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = a[[p, p]];
                let aqq = a[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                // stable tangent of the rotation angle
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].partial_cmp(&a[[i, i]]).unwrap());

    let mut values = Array1::<f64>::zeros(n);
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = a[[src, src]];
        let mut max_abs = 0.0f64;
        let mut sign = 1.0f64;
        for k in 0..n {
            let x = v[[k, src]];
            if x.abs() > max_abs {
                max_abs = x.abs();
                sign = if x < 0.0 { -1.0 } else { 1.0 };
            }
        }
        for k in 0..n {
            vectors[[k, dst]] = sign * v[[k, src]];
        }
    }
    (values, vectors)
}

/// Solve `a x = b` for square `a` with partial-pivot Gaussian elimination.
///
/// `b` may carry multiple right-hand sides as columns. Returns `None` when a
/// pivot is numerically zero.
pub(crate) fn solve(a: &Array2<f64>, b: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "solve needs a square matrix");
    assert_eq!(n, b.nrows(), "rhs rows must match matrix size");
    let m = b.ncols();
    let mut aug = Array2::<f64>::zeros((n, n + m));
    for i in 0..n {
        for j in 0..n {
            aug[[i, j]] = a[[i, j]];
        }
        for j in 0..m {
            aug[[i, n + j]] = b[[i, j]];
        }
    }

    let scale: f64 = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let pivot_tol = scale * f64::EPSILON * (n as f64) * 16.0;

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = aug[[col, col]].abs();
        for row in (col + 1)..n {
            if aug[[row, col]].abs() > pivot_val {
                pivot_val = aug[[row, col]].abs();
                pivot_row = row;
            }
        }
        if pivot_val <= pivot_tol {
            return None;
        }
        if pivot_row != col {
            for j in 0..(n + m) {
                aug.swap([col, j], [pivot_row, j]);
            }
        }
        let pivot = aug[[col, col]];
        for row in (col + 1)..n {
            let factor = aug[[row, col]] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..(n + m) {
                let sub = factor * aug[[col, j]];
                aug[[row, j]] -= sub;
            }
        }
    }

    let mut x = Array2::<f64>::zeros((n, m));
    for j in 0..m {
        for i in (0..n).rev() {
            let mut sum = aug[[i, n + j]];
            for k in (i + 1)..n {
                sum -= aug[[i, k]] * x[[k, j]];
            }
            x[[i, j]] = sum / aug[[i, i]];
        }
    }
    Some(x)
}

/// Determinant by LU factorization with partial pivoting.
pub(crate) fn det(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "det needs a square matrix");
    let mut lu = a.clone();
    let mut sign = 1.0f64;
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = lu[[col, col]].abs();
        for row in (col + 1)..n {
            if lu[[row, col]].abs() > pivot_val {
                pivot_val = lu[[row, col]].abs();
                pivot_row = row;
            }
        }
        if pivot_val == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            for j in 0..n {
                lu.swap([col, j], [pivot_row, j]);
            }
            sign = -sign;
        }
        let pivot = lu[[col, col]];
        for row in (col + 1)..n {
            let factor = lu[[row, col]] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                let sub = factor * lu[[col, j]];
                lu[[row, j]] -= sub;
            }
        }
    }
    let mut out = sign;
    for i in 0..n {
        out *= lu[[i, i]];
    }
    out
}

/// Pearson correlation coefficient of two equal-length vectors.
///
/// Returns 0.0 when either vector has zero variance.
pub(crate) fn pearson(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
    assert_eq!(x.len(), y.len(), "pearson needs equal-length vectors");
    let n = x.len() as f64;
    let mx = x.sum() / n;
    let my = y.sum() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y.iter()) {
        let da = a - mx;
        let db = b - my;
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}
