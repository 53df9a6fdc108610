//! One-dimensional baseline on the integer frequency grid: two Hankel
//! matrices from f~(0..2m), whitened into a k x k pencil whose eigenvalues
//! are the location phases e^{i pi mu_j}. The same whitening and pencil
//! kernels as the tensor path; only the slices differ.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jennrich::{eigen_pencil, DEFAULT_RANK_TOL_REL};
use crate::kernels::{cond2, lstsq, truncated_svd};
use crate::model::FrequencyOracle;

#[derive(Debug, Clone)]
pub struct HankelPair {
    /// H0[i,j] = f~(i+j), H1[i,j] = f~(i+j+1), both m x m.
    pub h0: Array2<Complex64>,
    pub h1: Array2<Complex64>,
    /// f~(0..=2m); the last point is not used by the matrices but
    /// completes the grid the weight fit runs on.
    pub values: Vec<Complex64>,
}

pub fn build_hankel<O: FrequencyOracle + ?Sized>(oracle: &mut O, m: usize) -> Result<HankelPair> {
    if oracle.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: oracle.dim(),
        });
    }
    if m == 0 {
        return Err(Error::invalid("m", "pencil size must be at least 1"));
    }
    let mut values = Vec::with_capacity(2 * m + 1);
    for s in 0..=2 * m {
        values.push(oracle.query(&[s as f64])?);
    }
    let h0 = Array2::from_shape_fn((m, m), |(i, j)| values[i + j]);
    let h1 = Array2::from_shape_fn((m, m), |(i, j)| values[i + j + 1]);
    Ok(HankelPair { h0, h1, values })
}

#[derive(Debug, Clone)]
pub struct PencilDiagnostics {
    pub sigma_k: f64,
    pub sigma_k_plus_1: f64,
    /// Minimal pairwise eigenvalue distance.
    pub sep_d: f64,
    /// Least-squares misfit of the fitted exponential sum on the full
    /// frequency grid.
    pub fit_residual: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Pencil1dResult {
    /// Coordinates in (-1, 1], descending pencil-eigenvalue order.
    pub locations: Vec<f64>,
    pub weights: Vec<Complex64>,
    pub diagnostics: PencilDiagnostics,
}

/// Whiten H0 by its truncated rank-k SVD, diagonalize the whitened pencil
/// (H1, H0), and read locations off the eigenvalue phases. Weights solve
/// the Vandermonde least squares over every queried frequency.
pub fn pencil_recover(pair: &HankelPair, k: usize) -> Result<Pencil1dResult> {
    let m = pair.h0.nrows();
    if k == 0 || k > m {
        return Err(Error::invalid("k", "need 1 <= k <= m for an m x m pencil"));
    }

    let svd = truncated_svd(&pair.h0, k)?;
    let tol = DEFAULT_RANK_TOL_REL * svd.sigma[0];
    if svd.sigma_k() < tol {
        return Err(Error::RankDeficient {
            sigma_k: svd.sigma_k(),
            tol,
        });
    }

    // Same adjoint whitening as the tensor path: E = P^H H conj(P) keeps
    // the V_m^T factor intact on complex-symmetric Hankel slices.
    let p_conj = svd.p.mapv(|z| z.conj());
    let whiten = |h: &Array2<Complex64>| p_conj.t().dot(h).dot(&p_conj);
    let e_a = whiten(&pair.h0);
    let e_b = whiten(&pair.h1);

    let pencil = eigen_pencil(&e_b, &e_a)?;
    let mut warnings = Vec::new();
    if let Some(w) = pencil.warning {
        warnings.push(w);
    }
    if pencil.sep_d < 1e-6 {
        warnings.push(format!(
            "eigenvalue collision: sep_D = {:.3e}; locations may be merged",
            pencil.sep_d
        ));
    }

    let locations: Vec<f64> = pencil
        .values
        .iter()
        .map(|lam| {
            let mu = lam.arg() / PI;
            if mu == -1.0 {
                1.0
            } else {
                mu
            }
        })
        .collect();

    let grid = pair.values.len();
    let a = Array2::from_shape_fn((grid, k), |(s, j)| Complex64::cis(PI * locations[j] * s as f64));
    let b = Array1::from_vec(pair.values.clone());
    let w = lstsq(&a, &b)?;
    let fitted = a.dot(&w);
    let fit_residual = (&fitted - &b).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    Ok(Pencil1dResult {
        locations,
        weights: w.to_vec(),
        diagnostics: PencilDiagnostics {
            sigma_k: svd.sigma[k - 1],
            sigma_k_plus_1: svd.residual(),
            sep_d: pencil.sep_d,
            fit_residual,
            warnings,
        },
    })
}

/// Build the pair and run the pencil in one call.
pub fn recover_1d<O: FrequencyOracle + ?Sized>(
    oracle: &mut O,
    k: usize,
    m: usize,
) -> Result<Pencil1dResult> {
    let pair = build_hankel(oracle, m)?;
    pencil_recover(&pair, k)
}

/// Condition number of the m x k node matrix V[i,j] = e^{i pi mu_j i},
/// i = 0..m-1. Finite and modest once m exceeds the reciprocal of the
/// node separation; needs m >= k to be finite at all.
pub fn vandermonde_cond(locations: &[f64], m: usize) -> Result<f64> {
    if locations.is_empty() || m == 0 {
        return Err(Error::invalid("locations/m", "need at least one node and one row"));
    }
    let k = locations.len();
    let v = Array2::from_shape_fn((m, k), |(i, j)| Complex64::cis(PI * locations[j] * i as f64));
    cond2(&v)
}
