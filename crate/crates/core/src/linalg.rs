//! Dense factorization helpers shared by the GP layers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Result, SmogError};

/// Relative diagonal jitter tried, in order, before giving up on a Cholesky.
///
/// Each step adds `rel * A_ii` to the `i`-th diagonal entry, so block-diagonal
/// matrices factor exactly like their blocks do on their own.
pub const JITTER_LADDER: [f64; 3] = [1e-8, 1e-6, 1e-4];

/// A Cholesky factor together with the relative jitter that made it succeed.
#[derive(Clone, Debug)]
pub struct JitteredCholesky {
    pub factor: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl JitteredCholesky {
    pub fn l(&self) -> DMatrix<f64> {
        self.factor.l()
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor.solve(b)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(b)
    }

    /// `L^{-1} b` for the lower factor `L`.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor.l_dirty().solve_lower_triangular_unchecked(b)
    }

    pub fn solve_lower_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factor.l_dirty().solve_lower_triangular_unchecked(b)
    }

    pub fn log_det(&self) -> f64 {
        let l = self.factor.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    pub fn dim(&self) -> usize {
        self.factor.l_dirty().nrows()
    }
}

/// Adds the base relative jitter to a copy of `a`; used by oracles that must
/// reproduce exactly the matrix the factorized path sees.
pub fn with_base_jitter(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += JITTER_LADDER[0] * a[(i, i)].abs();
    }
    m
}

/// Cholesky of a symmetric positive definite matrix with jitter escalation.
pub fn jittered_cholesky(a: &DMatrix<f64>) -> Result<JitteredCholesky> {
    if a.nrows() != a.ncols() {
        return Err(SmogError::InvalidArgument(format!(
            "cholesky of non-square {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(SmogError::Numerical("non-finite entry in matrix to factor".into()));
    }
    for &rel in JITTER_LADDER.iter() {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += rel * a[(i, i)].abs();
        }
        if let Some(factor) = Cholesky::new(m) {
            return Ok(JitteredCholesky { factor, jitter: rel });
        }
    }
    let (min_diag, max_diag) = (0..a.nrows()).fold((f64::INFINITY, f64::NEG_INFINITY), |acc, i| {
        (acc.0.min(a[(i, i)]), acc.1.max(a[(i, i)]))
    });
    Err(SmogError::Numerical(format!(
        "cholesky failed for {n}x{n} matrix after jitter {JITTER_LADDER:?}; diagonal range [{min_diag:e}, {max_diag:e}]",
        n = a.nrows()
    )))
}

/// Lower-triangular `L` with `L Lᵀ = A` for a symmetric positive
/// *semi*-definite `A`.
///
/// Pivots that fall below `tol * max_diag` are treated as exact zeros, which
/// lets zero-variance directions pass through untouched. A pivot more negative
/// than that is reported as a numerical error.
pub fn psd_factor(a: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(SmogError::InvalidArgument("psd_factor of non-square matrix".into()));
    }
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0_f64, f64::max);
    let floor = tol * scale.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -floor.max(1e-8 * scale) {
            return Err(SmogError::Numerical(format!(
                "matrix is not positive semi-definite: pivot {d:e} at {j}"
            )));
        }
        if d <= floor {
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `max |a - b| / max(max |b|, tiny)`: the scale-relative discrepancy used by
/// all oracle comparisons.
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "relative_error shape mismatch");
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b.iter()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

pub fn relative_error_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    assert_eq!(a.len(), b.len(), "relative_error_vec length mismatch");
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b.iter()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())) / scale
}
