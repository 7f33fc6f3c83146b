//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{AadError, Result};

/// Pivots below this fraction of the largest diagonal entry mark a
/// numerically singular system.
const PIVOT_TOL: f64 = 1e-13;

/// Number of eigenvalues of a symmetric PSD matrix that are negligible
/// relative to the largest one.
pub fn rank_deficiency(a: &DMatrix<f64>) -> usize {
    let eig = a.clone().symmetric_eigenvalues();
    let top = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = top * a.nrows() as f64 * f64::EPSILON * 16.0;
    eig.iter().filter(|v| **v <= cut).count()
}

/// Solves `a x = b` for symmetric positive-definite `a` via Cholesky,
/// reporting rank deficiency instead of returning a meaningless solution.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    let singular = || AadError::Singular {
        dim: n,
        deficiency: rank_deficiency(a).max(1),
    };
    let max_diag = a.diagonal().iter().fold(0.0f64, |m, v| m.max(*v));
    if !(max_diag > 0.0) {
        return Err(singular());
    }
    let chol = a.clone().cholesky().ok_or_else(singular)?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    if min_pivot < PIVOT_TOL * max_diag {
        return Err(singular());
    }
    let x = chol.solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(AadError::NonFinite("linear solve"));
    }
    Ok(x)
}

/// `‖a x − b‖ / ‖b‖` (or the absolute residual when `b = 0`).
pub fn relative_residual(a: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let r = (a * x - b).norm();
    let nb = b.norm();
    if nb > 0.0 {
        r / nb
    } else {
        r
    }
}

/// Symmetric inverse square root `a^{-1/2}` and the condition number of `a`.
pub fn inv_sqrt_sym(a: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let eig = a.clone().symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let d = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 }),
    );
    let v = &eig.eigenvectors;
    (v * DMatrix::from_diagonal(&d) * v.transpose(), cond)
}

/// Symmetric eigendecomposition with eigenpairs sorted by descending eigenvalue.
pub fn sorted_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = a.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(a.nrows(), n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// `xᵀx` for a tall matrix, computed once and symmetrized.
pub fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    let g = x.tr_mul(x);
    (&g + g.transpose()) * 0.5
}
