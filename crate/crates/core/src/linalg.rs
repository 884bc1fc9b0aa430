//! Dense least-squares and small matrix helpers built on nalgebra.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Relative threshold on the diagonal of R (after unit-norm column scaling)
/// below which a design is treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Least-squares solution of `Y = X B + E` for one or more response columns.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    /// `cols(X) × cols(Y)`.
    pub coefficients: DMatrix<f64>,
    /// `rows(X) × cols(Y)`.
    pub residuals: DMatrix<f64>,
    /// `(X'X)^{-1}`.
    pub xtx_inv: DMatrix<f64>,
}

impl LeastSquares {
    pub fn fit(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        let (n, k) = x.shape();
        if y.nrows() != n {
            return Err(Error::InvalidArgument(format!(
                "design has {n} rows but response has {}",
                y.nrows()
            )));
        }
        if n < k {
            return Err(Error::TooFewRows { rows: n, cols: k });
        }
        if k == 0 {
            return Ok(LeastSquares {
                coefficients: DMatrix::zeros(0, y.ncols()),
                residuals: y.clone(),
                xtx_inv: DMatrix::zeros(0, 0),
            });
        }
        // Scale columns to unit norm so that the rank test is unit-free.
        let mut scale = DVector::zeros(k);
        let mut xs = x.clone();
        for j in 0..k {
            let norm = x.column(j).norm();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::RankDeficient);
            }
            scale[j] = norm;
            xs.column_mut(j).scale_mut(1.0 / norm);
        }
        let qr = xs.qr();
        let r = qr.r();
        let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if (0..k).any(|i| r[(i, i)].abs() <= RANK_TOL * max_diag) {
            return Err(Error::RankDeficient);
        }
        let q = qr.q();
        let qty = q.transpose() * y;
        let bs = r
            .solve_upper_triangular(&qty)
            .ok_or(Error::RankDeficient)?;
        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .ok_or(Error::RankDeficient)?;
        let mut coefficients = bs;
        for j in 0..k {
            coefficients.row_mut(j).scale_mut(1.0 / scale[j]);
        }
        let mut xtx_inv = &r_inv * r_inv.transpose();
        for i in 0..k {
            for j in 0..k {
                xtx_inv[(i, j)] /= scale[i] * scale[j];
            }
        }
        let residuals = y - x * &coefficients;
        Ok(LeastSquares {
            coefficients,
            residuals,
            xtx_inv,
        })
    }

    pub fn fit_vector(x: &DMatrix<f64>, y: &[f64]) -> Result<Self> {
        let y = DMatrix::from_column_slice(y.len(), 1, y);
        Self::fit(x, &y)
    }
}

/// Residuals of regressing each column of `y` on `x`; `y` itself when `x` has
/// no columns.
pub fn partial_out(y: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() == 0 {
        return Ok(y.clone());
    }
    Ok(LeastSquares::fit(x, y)?.residuals)
}

/// Horizontally concatenates blocks with equal row counts.
pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.columns_mut(at, b.ncols()).copy_from(*b);
        at += b.ncols();
    }
    out
}

/// Largest eigenvalue modulus of a square real matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    // unbounded Schur iteration can stall on nilpotent companions
    if let Some(schur) = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 10_000) {
        return schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    gelfand_radius(m)
}

/// `‖M^n‖^{1/n}` by repeated squaring, rescaled to stay finite.
fn gelfand_radius(m: &DMatrix<f64>) -> f64 {
    let mut power = m.clone();
    let mut log_scale = 0.0;
    let mut n = 1.0;
    for _ in 0..40 {
        let norm = power.norm();
        if norm == 0.0 {
            return 0.0;
        }
        power /= norm;
        log_scale += norm.ln();
        power = &power * &power;
        log_scale *= 2.0;
        n *= 2.0;
    }
    let norm = power.norm();
    if norm == 0.0 {
        return 0.0;
    }
    ((log_scale + norm.ln()) / n).exp()
}
