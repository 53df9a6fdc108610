//! Spherical Gaussian mixtures reduced to point-source recovery: the
//! empirical characteristic function, divided by the Gaussian envelope
//! e^{-sigma^2 ||s||^2 / 2}, looks like a noisy bandlimited measurement of
//! point masses at the means. The amplification of the CF sampling error
//! is exponential in (sigma R)^2, which the oracle reports per query so a
//! caller can refuse hopeless cutoffs up front.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::FrequencyOracle;
use crate::recovery::{recover_with_plan, RecoverOptions, RecoveryResult};
use crate::rng::mix_seed;
use crate::sampling::{choose_cutoff, choose_sample_count, draw_plan};

/// Exponent ceiling for the deconvolution envelope; e^700 is the last
/// decade of double range.
pub const CF_EXPONENT_MAX: f64 = 700.0;

#[derive(Debug, Clone)]
pub struct GmmModel {
    means: Array2<f64>,
    sigma: f64,
    weights: Vec<f64>,
}

impl GmmModel {
    /// Means confined to [-1,1]^d, one shared deviation (zero is allowed
    /// and collapses components to point masses), weights on the simplex.
    pub fn new(means: Array2<f64>, sigma: f64, weights: Vec<f64>) -> Result<Self> {
        let (k, _) = means.dim();
        if k == 0 {
            return Err(Error::invalid("means", "need at least one component"));
        }
        if means.iter().any(|x| !x.is_finite() || x.abs() > 1.0) {
            return Err(Error::invalid("means", "must lie in [-1, 1]^d"));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", "must be finite and nonnegative"));
        }
        if weights.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights", "must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("weights", "must sum to 1"));
        }
        Ok(GmmModel {
            means,
            sigma,
            weights,
        })
    }

    pub fn d(&self) -> usize {
        self.means.ncols()
    }

    pub fn k(&self) -> usize {
        self.means.nrows()
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mean separation in deviation units: min ||mu_j - mu_j'|| / sigma.
    pub fn separation_ratio(&self) -> f64 {
        let k = self.k();
        let mut min_sep = f64::INFINITY;
        for i in 0..k {
            for j in i + 1..k {
                let dist: f64 = (0..self.d())
                    .map(|t| {
                        let diff = self.means[[i, t]] - self.means[[j, t]];
                        diff * diff
                    })
                    .sum::<f64>()
                    .sqrt();
                min_sep = min_sep.min(dist);
            }
        }
        min_sep / self.sigma
    }

    /// Analytic characteristic function sum_j w_j e^{-sigma^2 ||s||^2 / 2
    /// + i <mu_j, s>}.
    pub fn characteristic_fn(&self, s: &[f64]) -> Complex64 {
        let norm_sq: f64 = s.iter().map(|x| x * x).sum();
        let envelope = (-0.5 * self.sigma * self.sigma * norm_sq).exp();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.k() {
            let dot: f64 = (0..self.d()).map(|t| self.means[[j, t]] * s[t]).sum();
            acc += self.weights[j] * Complex64::cis(dot);
        }
        acc * envelope
    }
}

/// N draws: component by mixing weight, then an isotropic Gaussian around
/// its mean. Rows are samples.
pub fn sample_gmm<R: Rng + ?Sized>(model: &GmmModel, n: usize, rng: &mut R) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one sample"));
    }
    let d = model.d();
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        let u: f64 = rng.random_range(0.0..1.0);
        let mut acc = 0.0;
        let mut comp = model.k() - 1;
        for (j, w) in model.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                comp = j;
                break;
            }
        }
        for t in 0..d {
            let g: f64 = rng.sample(StandardNormal);
            out[[i, t]] = model.means[[comp, t]] + model.sigma * g;
        }
    }
    Ok(out)
}

/// (1/N) sum_l e^{i <x_l, s>}; the caller supplies any frequency scaling.
pub fn empirical_cf(samples: &Array2<f64>, s: &[f64]) -> Complex64 {
    let n = samples.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for row in samples.rows() {
        let dot: f64 = row.iter().zip(s.iter()).map(|(x, f)| x * f).sum();
        acc += Complex64::cis(dot);
    }
    acc / n as f64
}

/// f~(s) = e^{pi^2 sigma^2 ||s||^2 / 2} phi_hat(pi s): in expectation the
/// bandlimited measurement of point masses at the mixture means.
pub struct DeconvolvedOracle<'a> {
    samples: &'a Array2<f64>,
    sigma: f64,
    memo: HashMap<Vec<u64>, Complex64>,
    max_noise_proxy: f64,
}

pub fn deconvolved_oracle(samples: &Array2<f64>, sigma: f64) -> Result<DeconvolvedOracle<'_>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", "must be positive and finite"));
    }
    if samples.nrows() == 0 {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    Ok(DeconvolvedOracle {
        samples,
        sigma,
        memo: HashMap::new(),
        max_noise_proxy: 0.0,
    })
}

impl DeconvolvedOracle<'_> {
    fn exponent(&self, s: &[f64]) -> f64 {
        let norm_sq: f64 = s.iter().map(|x| x * x).sum();
        0.5 * PI * PI * self.sigma * self.sigma * norm_sq
    }

    /// e^{exponent(s)} / sqrt(N): the CF sampling error after envelope
    /// amplification, the effective measurement noise at s.
    pub fn noise_proxy_at(&self, s: &[f64]) -> f64 {
        self.exponent(s).exp() / (self.samples.nrows() as f64).sqrt()
    }

    /// Largest proxy over all queries made so far.
    pub fn max_noise_proxy(&self) -> f64 {
        self.max_noise_proxy
    }
}

impl FrequencyOracle for DeconvolvedOracle<'_> {
    fn dim(&self) -> usize {
        self.samples.ncols()
    }

    fn query(&mut self, s: &[f64]) -> Result<Complex64> {
        if s.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: s.len(),
            });
        }
        let key: Vec<u64> = s.iter().map(|x| x.to_bits()).collect();
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        let exponent = self.exponent(s);
        if exponent > CF_EXPONENT_MAX {
            return Err(Error::CfOverflow {
                exponent,
                max: CF_EXPONENT_MAX,
            });
        }
        let scaled: Vec<f64> = s.iter().map(|x| PI * x).collect();
        let value = empirical_cf(self.samples, &scaled) * exponent.exp();
        self.max_noise_proxy = self
            .max_noise_proxy
            .max(exponent.exp() / (self.samples.nrows() as f64).sqrt());
        self.memo.insert(key, value);
        Ok(value)
    }

    fn distinct_queries(&self) -> usize {
        self.memo.len()
    }
}

#[derive(Debug, Clone)]
pub struct SigmaDiagnostic {
    pub sigma: f64,
    /// Weight-fit residual when the recovery succeeded.
    pub weight_residual: Option<f64>,
    /// Largest noise amplification seen while querying.
    pub max_noise_proxy: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GmmLearned {
    pub model: GmmModel,
    /// Index into the sigma grid of the winning candidate.
    pub selected: usize,
    /// Total weight mass removed when projecting onto the simplex
    /// (negative real dust and imaginary parts).
    pub clipped_mass: f64,
    pub recovery: RecoveryResult,
    pub per_sigma: Vec<SigmaDiagnostic>,
}

/// Grid search over candidate deviations: deconvolve with each sigma,
/// recover point sources with a cutoff sized for the implied mean
/// separation sigma * delta_g_hint, and keep the sigma whose weight fit
/// has the smallest residual. Failing grid entries are recorded and
/// skipped; only a fully failed grid is an error.
pub fn learn_gmm(
    samples: &Array2<f64>,
    d: usize,
    k: usize,
    sigma_grid: &[f64],
    delta_g_hint: f64,
    seed: u64,
) -> Result<GmmLearned> {
    if samples.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: samples.ncols(),
        });
    }
    if sigma_grid.is_empty() {
        return Err(Error::invalid("sigma_grid", "must be nonempty"));
    }
    if !(delta_g_hint > 0.0 && delta_g_hint.is_finite()) {
        return Err(Error::invalid("delta_g_hint", "must be positive and finite"));
    }

    let mut per_sigma: Vec<SigmaDiagnostic> = Vec::with_capacity(sigma_grid.len());
    let mut best: Option<(usize, RecoveryResult)> = None;

    for (i, &sigma) in sigma_grid.iter().enumerate() {
        let attempt = (|| -> Result<(RecoveryResult, f64)> {
            let mut oracle = deconvolved_oracle(samples, sigma)?;
            let delta_hint = sigma * delta_g_hint;
            let r = choose_cutoff(d, k, delta_hint, 0.25)?;
            let m = choose_sample_count(k, 0.25, 0.1, d)?;
            let plan = draw_plan(d, k, r, m, 2, mix_seed(&[seed, 0x676d6d, i as u64]))?;
            let opts = RecoverOptions {
                delta_hint: Some(delta_hint),
                ..RecoverOptions::default()
            };
            let res = recover_with_plan(&mut oracle, &plan, k, &opts)?;
            Ok((res, oracle.max_noise_proxy()))
        })();
        match attempt {
            Ok((res, proxy)) => {
                per_sigma.push(SigmaDiagnostic {
                    sigma,
                    weight_residual: Some(res.diagnostics.weight_residual),
                    max_noise_proxy: proxy,
                    error: None,
                });
                let better = best
                    .as_ref()
                    .map(|(_, b)| res.diagnostics.weight_residual < b.diagnostics.weight_residual)
                    .unwrap_or(true);
                if better {
                    best = Some((i, res));
                }
            }
            Err(e) => {
                per_sigma.push(SigmaDiagnostic {
                    sigma,
                    weight_residual: None,
                    max_noise_proxy: 0.0,
                    error: Some(e.to_string()),
                });
            }
        }
    }

    let (selected, recovery) = best.ok_or_else(|| {
        let summary = per_sigma
            .iter()
            .map(|diag| {
                format!(
                    "sigma {:.6}: {}",
                    diag.sigma,
                    diag.error.as_deref().unwrap_or("unknown failure")
                )
            })
            .collect::<Vec<_>>()
            .join("; ");
        Error::AllSigmaFailed { summary }
    })?;

    // Simplex projection: drop imaginary parts, clip negative dust, scale
    // to total mass 1; everything removed is reported.
    let mut clipped_mass = 0.0;
    let mut weights: Vec<f64> = recovery
        .weights
        .iter()
        .map(|w| {
            clipped_mass += w.im.abs();
            if w.re < 0.0 {
                clipped_mass += -w.re;
                0.0
            } else {
                w.re
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllSigmaFailed {
            summary: "selected recovery produced no positive weight mass".to_string(),
        });
    }
    for w in weights.iter_mut() {
        *w /= total;
    }

    let model = GmmModel::new(recovery.locations.clone(), sigma_grid[selected], weights)?;
    Ok(GmmLearned {
        model,
        selected,
        clipped_mass,
        recovery,
        per_sigma,
    })
}

/// Binary layout: u64 N, u64 d, then N*d little-endian doubles row-major.
pub fn write_samples<P: AsRef<Path>>(path: P, samples: &Array2<f64>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(&(samples.nrows() as u64).to_le_bytes())?;
    w.write_all(&(samples.ncols() as u64).to_le_bytes())?;
    for x in samples.iter() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples<P: AsRef<Path>>(path: P) -> Result<Array2<f64>> {
    let mut file = std::fs::File::open(path)?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)?;
    if buf.len() < 16 {
        return Err(Error::Parse("sample file shorter than its header".to_string()));
    }
    let n = u64::from_le_bytes(buf[0..8].try_into().unwrap()) as usize;
    let d = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
    let need = 16 + 8 * n * d;
    if buf.len() != need {
        return Err(Error::Parse(format!(
            "sample file holds {} bytes, header {n} x {d} needs {need}",
            buf.len()
        )));
    }
    let mut out = Array2::zeros((n, d));
    for (i, chunk) in buf[16..].chunks_exact(8).enumerate() {
        out[[i / d, i % d]] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    Ok(out)
}
