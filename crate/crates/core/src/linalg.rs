//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Largest relative ridge tried before a factorization is declared failed.
pub const MAX_RELATIVE_RIDGE: f64 = 1e-2;
/// First relative ridge tried when the caller asked for none and the matrix is singular.
pub const FALLBACK_RELATIVE_RIDGE: f64 = 1e-6;

/// `(m + mᵀ) / 2`.
pub fn symmetrize(m: &Mat) -> Mat {
    let mut out = m + m.transpose();
    out *= 0.5;
    out
}

/// `‖m − mᵀ‖_F / ‖m‖_F`, zero for the zero matrix.
pub fn asymmetry(m: &Mat) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        0.0
    } else {
        (m - m.transpose()).norm() / norm
    }
}

/// Per-dimension average of the trace; falls back to 1 for a zero-trace matrix so the
/// ridge schedule still makes progress.
pub fn ridge_scale(m: &Mat) -> f64 {
    let scale = m.trace() / m.nrows().max(1) as f64;
    if scale > 0.0 && scale.is_finite() {
        scale
    } else {
        1.0
    }
}

/// A Cholesky factor of `m + ridge·I` together with the absolute ridge that was added.
pub struct RidgedCholesky {
    pub chol: Cholesky<f64, Dyn>,
    pub ridge: f64,
}

/// Factors `m + τ·(tr(m)/n)·I`, starting at `relative_ridge` and escalating ×10 up
/// to [`MAX_RELATIVE_RIDGE`] until the factorization succeeds.
pub fn cholesky_ridged(m: &Mat, relative_ridge: f64, what: &str) -> Result<RidgedCholesky> {
    if !(relative_ridge >= 0.0) || !relative_ridge.is_finite() {
        return Err(Error::InvalidConfig(format!("ridge must be a nonnegative finite value, got {relative_ridge}")));
    }
    let scale = ridge_scale(m);
    let mut tau = relative_ridge;
    loop {
        let ridge = tau * scale;
        let mut shifted = m.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += ridge;
        }
        if let Some(chol) = Cholesky::new(shifted) {
            if chol.l_dirty().iter().all(|x| x.is_finite()) {
                return Ok(RidgedCholesky { chol, ridge });
            }
        }
        tau = if tau == 0.0 { FALLBACK_RELATIVE_RIDGE } else { tau * 10.0 };
        if tau > MAX_RELATIVE_RIDGE * (1.0 + 1e-9) {
            return Err(Error::Factorization(format!(
                "{what} is not positive definite even with relative ridge {MAX_RELATIVE_RIDGE}"
            )));
        }
        log::debug!("{what}: escalating ridge to {tau:e}");
    }
}

/// `ln |A|` from its Cholesky factor.
pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Inverse of a symmetric positive-definite matrix, symmetrized.
pub fn spd_inverse(m: &Mat, what: &str) -> Result<Mat> {
    let chol = Cholesky::new(m.clone())
        .ok_or_else(|| Error::Factorization(format!("{what} is not positive definite")))?;
    Ok(symmetrize(&chol.inverse()))
}

/// Inverse of the lower-triangular factor `L`.
pub fn lower_inverse(chol: &Cholesky<f64, Dyn>) -> Result<Mat> {
    let l = chol.l();
    let n = l.nrows();
    l.solve_lower_triangular(&Mat::identity(n, n))
        .ok_or_else(|| Error::Factorization("triangular factor is singular".into()))
}

/// 2-norm condition number estimate of a symmetric PSD matrix from its eigenvalues.
pub fn spd_condition(m: &Mat) -> f64 {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Accumulates `Σ xxᵀ` for the given vectors in order.
pub fn scatter<'a>(dim: usize, vectors: impl IntoIterator<Item = &'a Vector>) -> Mat {
    let mut acc = Mat::zeros(dim, dim);
    for v in vectors {
        acc.ger(1.0, v, v, 1.0);
    }
    acc
}

/// Relative Frobenius distance `‖a − b‖ / ‖b‖` (absolute when `b` is zero).
pub fn rel_frobenius(a: &Mat, b: &Mat) -> f64 {
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Mean of a non-empty set of vectors.
pub fn mean<'a>(dim: usize, vectors: impl IntoIterator<Item = &'a Vector>) -> Vector {
    let mut acc = Vector::zeros(dim);
    let mut n = 0usize;
    for v in vectors {
        acc += v;
        n += 1;
    }
    if n > 0 {
        acc /= n as f64;
    }
    acc
}
