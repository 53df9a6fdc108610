//! Thin wrappers over the dense LAPACK kernels the algorithms need:
//! truncated SVD, non-Hermitian eigendecomposition, linear solves and
//! least squares, all on complex matrices.

use std::borrow::Cow;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Factorize, LeastSquaresSvd, Solve, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// LAPACK rejects non-row-major strides; inputs assembled from transposes
/// or axis views get copied into standard layout first.
fn standard(a: &Array2<Complex64>) -> Cow<'_, Array2<Complex64>> {
    if a.is_standard_layout() {
        Cow::Borrowed(a)
    } else {
        Cow::Owned(Array2::from_shape_fn(a.dim(), |(i, j)| a[[i, j]]))
    }
}

/// Rank-k truncated SVD of a complex matrix: M ~ P diag(sigma[..k]) Q^H.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// n x k, orthonormal columns (left factor).
    pub p: Array2<Complex64>,
    /// Full singular spectrum, descending.
    pub sigma: Array1<f64>,
    /// n x k, orthonormal columns (right factor).
    pub q: Array2<Complex64>,
    pub k: usize,
}

impl TruncatedSvd {
    pub fn sigma_k(&self) -> f64 {
        self.sigma[self.k - 1]
    }

    /// Spectral-norm truncation residual ||M - P diag Q^H||_2 = sigma_{k+1}.
    pub fn residual(&self) -> f64 {
        if self.k < self.sigma.len() {
            self.sigma[self.k]
        } else {
            0.0
        }
    }
}

pub fn truncated_svd(m: &Array2<Complex64>, k: usize) -> Result<TruncatedSvd> {
    let (rows, cols) = m.dim();
    if k == 0 || k > rows.min(cols) {
        return Err(Error::ShapeMismatch {
            op: "truncated_svd",
            detail: format!("rank {k} invalid for {rows}x{cols} input"),
        });
    }
    let (u, sigma, vt) = standard(m).svd(true, true)?;
    let u = u.expect("left singular vectors requested");
    let vt = vt.expect("right singular vectors requested");
    let p = Array2::from_shape_fn((rows, k), |(i, j)| u[[i, j]]);
    // LAPACK hands back V^H; the right factor's columns are its conjugated rows.
    let q = Array2::from_shape_fn((cols, k), |(i, j)| vt[[j, i]].conj());
    Ok(TruncatedSvd { p, sigma, q, k })
}

/// Eigendecomposition of a general complex matrix; unit-norm eigenvector
/// columns, no ordering guarantee (callers sort).
pub fn eig_nonsymmetric(m: &Array2<Complex64>) -> Result<(Array1<Complex64>, Array2<Complex64>)> {
    let (values, mut vectors) = standard(m).eig()?;
    for mut col in vectors.columns_mut() {
        let n = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            col.mapv_inplace(|z| z / n);
        }
    }
    Ok((values, vectors))
}

/// Solves A X = B column by column through one LU factorization.
pub fn solve_columns(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::ShapeMismatch {
            op: "solve_columns",
            detail: format!("{}x{} vs {}x{}", a.nrows(), a.ncols(), b.nrows(), b.ncols()),
        });
    }
    let lu = standard(a).factorize()?;
    let mut x = Array2::zeros(b.dim());
    for (j, col) in b.columns().into_iter().enumerate() {
        let sol = lu.solve(&col.to_owned())?;
        x.column_mut(j).assign(&sol);
    }
    Ok(x)
}

/// Minimum-norm least-squares solution of A w = b.
pub fn lstsq(a: &Array2<Complex64>, b: &Array1<Complex64>) -> Result<Array1<Complex64>> {
    if a.nrows() != b.len() {
        return Err(Error::ShapeMismatch {
            op: "lstsq",
            detail: format!("{} rows vs rhs length {}", a.nrows(), b.len()),
        });
    }
    Ok(standard(a).least_squares(b)?.solution)
}

/// Two-norm condition number sigma_max / sigma_min (infinite when singular).
pub fn cond2(a: &Array2<Complex64>) -> Result<f64> {
    let (_, sigma, _) = standard(a).svd(false, false)?;
    let max = sigma[0];
    let min = sigma[sigma.len() - 1];
    Ok(if min > 0.0 { max / min } else { f64::INFINITY })
}
