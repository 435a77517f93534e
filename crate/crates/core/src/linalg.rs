//! Small dense helpers shared by the numerical modules.

use nalgebra::{Cholesky, Dyn};

use crate::{CMatrix, C64};

/// Pivot threshold, relative to the largest diagonal entry, below which a
/// Hermitian matrix is treated as singular.
pub(crate) const SINGULAR_RTOL: f64 = 1e-13;

/// Cholesky factorization that also rejects numerically singular input.
pub(crate) fn cholesky_checked(m: CMatrix) -> Option<Cholesky<C64, Dyn>> {
    let max_diag = m.diagonal().iter().map(|z| z.re).fold(0.0_f64, f64::max);
    if !(max_diag > 0.0) || !max_diag.is_finite() {
        return None;
    }
    let chol = Cholesky::new(m)?;
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|z| z.re * z.re)
        .fold(f64::INFINITY, f64::min);
    (min_pivot > SINGULAR_RTOL * max_diag).then_some(chol)
}

/// Squared Euclidean norm of every column.
pub(crate) fn column_norms_sqr(m: &CMatrix) -> Vec<f64> {
    m.column_iter().map(|c| c.norm_squared()).collect()
}

/// `max |m - mᴴ|` relative to `max |m|`.
pub(crate) fn hermitian_defect(m: &CMatrix) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst / scale
}


pub(crate) fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
