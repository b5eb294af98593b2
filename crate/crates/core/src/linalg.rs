//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::DMatrix;

use crate::ops::{Operator, C64};

/// Largest entrywise modulus of `a - b`; infinite on shape mismatch.
pub fn max_abs_diff(a: &Operator, b: &Operator) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest entrywise modulus.
pub fn max_abs(a: &Operator) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// `max |A - A†|`.
pub fn hermiticity_residual(a: &Operator) -> f64 {
    max_abs_diff(a, &a.adjoint())
}

/// `Tr(AB)` without forming the product.
pub fn trace_product(a: &Operator, b: &Operator) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues(a: &Operator) -> Vec<f64> {
    let herm = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// `(A + A†)/2`.
pub fn hermitian_part(a: &Operator) -> Operator {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Moore-Penrose pseudo-inverse with relative singular-value cutoff; also
/// returns the numerical rank.
pub fn pseudo_inverse_real(a: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = smax * rel_tol;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let pinv = svd
        .pseudo_inverse(cutoff.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DMatrix::zeros(a.ncols(), a.nrows()));
    (pinv, rank)
}

/// Least-squares solution of `A x = b` for complex `A` via SVD; returns the
/// solution and the numerical rank.
pub fn least_squares_complex(a: &DMatrix<C64>, b: &DMatrix<C64>, rel_tol: f64) -> (DMatrix<C64>, usize) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = (smax * rel_tol).max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let x = svd
        .solve(b, cutoff)
        .unwrap_or_else(|_| DMatrix::zeros(a.ncols(), b.ncols()));
    (x, rank)
}

/// Greedy rank-revealing row selection by modified Gram-Schmidt with
/// pivoting on the residual norm. Rows whose residual falls below `tol`
/// (relative to the largest row norm) are treated as dependent.
///
/// Returns the selected row indices in the order they were picked.
pub fn independent_rows(a: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    let (rows, cols) = a.shape();
    let mut residual: Vec<Vec<f64>> = (0..rows).map(|i| a.row(i).iter().copied().collect()).collect();
    let scale = residual
        .iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let mut chosen = Vec::new();
    let mut available: Vec<bool> = vec![true; rows];
    for _ in 0..cols.min(rows) {
        let mut best = None;
        let mut best_norm = 0.0;
        for i in 0..rows {
            if !available[i] {
                continue;
            }
            let nrm = residual[i].iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > best_norm {
                best_norm = nrm;
                best = Some(i);
            }
        }
        let Some(p) = best else { break };
        if best_norm <= tol * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        available[p] = false;
        chosen.push(p);
        let q: Vec<f64> = residual[p].iter().map(|x| x / best_norm).collect();
        for i in 0..rows {
            if !available[i] {
                continue;
            }
            let proj: f64 = residual[i].iter().zip(&q).map(|(x, y)| x * y).sum();
            for (x, y) in residual[i].iter_mut().zip(&q) {
                *x -= proj * y;
            }
        }
    }
    chosen
}
