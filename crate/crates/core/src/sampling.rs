//! Frequency-set design: cutoff and sample-count selection, the random
//! Gaussian sampling plan with its augmented row block, and assembly of the
//! third-order measurement tensor.

use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{FrequencyOracle, SourceSet};
use crate::rng::substream;
use crate::tensor::Tensor3;

const TAG_PLAN: u64 = 0x706c_616e;
const TAG_REDRAW: u64 = 0x7265_6472;

/// Frequencies to measure at: m Gaussian rows s^(1..m) ~ N(0, R^2 I),
/// augmented by the d standard basis vectors and the zero vector (the
/// augmented block's position is load-bearing: recovery reads coordinates
/// off rows m..m+d and the zero row anchors per-column scale), plus a unit
/// projection vector v defining the slice shifts v, 2v (and optionally 0).
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub d: usize,
    pub k: usize,
    pub m: usize,
    /// Cutoff scale R of the Gaussian frequency draw.
    pub r: f64,
    pub slice_count: usize,
    pub seed: u64,
    /// m x d Gaussian rows.
    pub samples: Array2<f64>,
    /// Unit vector defining the slice shifts.
    pub v: Array1<f64>,
    /// Accuracy / confidence parameters the plan was designed for.
    pub eps_x: f64,
    pub delta_s: f64,
    pub delta_v: f64,
}

/// Smallest cutoff R the recovery guarantee asks for at separation delta.
pub fn choose_cutoff(d: usize, k: usize, delta: f64, eps_x: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("d", "dimension must be positive"));
    }
    if k == 0 {
        return Err(Error::invalid("k", "need at least one source"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid("delta", "must be positive and finite"));
    }
    if !(eps_x > 0.0 && eps_x < 0.5) {
        return Err(Error::invalid("eps_x", "must lie in (0, 1/2)"));
    }
    let log_term = if d == 1 {
        (1.0 + 2.0 / eps_x).ln()
    } else {
        (k as f64 / eps_x).ln()
    };
    Ok((2.0 * log_term).sqrt() / (std::f64::consts::PI * delta))
}

/// Gaussian sample count meeting the factor-conditioning guarantee
/// (never below d).
pub fn choose_sample_count(k: usize, eps_x: f64, delta_s: f64, d: usize) -> Result<usize> {
    if d == 0 || k == 0 {
        return Err(Error::invalid("d", "d and k must be positive"));
    }
    if !(eps_x > 0.0 && eps_x < 0.5) {
        return Err(Error::invalid("eps_x", "must lie in (0, 1/2)"));
    }
    if !(delta_s > 0.0 && delta_s < 0.5) {
        return Err(Error::invalid("delta_s", "must lie in (0, 1/2)"));
    }
    let lead = (k as f64 / eps_x) * (8.0 * (k as f64 / delta_s).ln()).sqrt();
    Ok(lead.max(d as f64).ceil() as usize)
}

/// Draws the plan deterministically from the seed: samples i.i.d.
/// N(0, R^2 I), then v uniform on the unit sphere.
pub fn draw_plan(
    d: usize,
    k: usize,
    r: f64,
    m: usize,
    slice_count: usize,
    seed: u64,
) -> Result<SamplePlan> {
    if d == 0 || k == 0 {
        return Err(Error::invalid("d", "d and k must be positive"));
    }
    if m < d {
        return Err(Error::invalid("m", format!("need m >= d, got m={m}, d={d}")));
    }
    if !(slice_count == 2 || slice_count == 3) {
        return Err(Error::invalid("slice_count", "must be 2 or 3"));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::invalid("r", "cutoff must be finite and nonnegative"));
    }
    let mut rng = substream(&[seed, TAG_PLAN]);
    let samples = Array2::from_shape_fn((m, d), |_| r * rng.sample::<f64, _>(StandardNormal));
    let v = unit_sphere(d, &mut rng);
    Ok(SamplePlan {
        d,
        k,
        m,
        r,
        slice_count,
        seed,
        samples,
        v,
        eps_x: 0.25,
        delta_s: 0.1,
        delta_v: 0.1,
    })
}

/// Uniform draw from the unit sphere in R^d.
pub fn unit_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Array1<f64> {
    loop {
        let v: Array1<f64> = Array1::from_shape_fn(d, |_| rng.sample(StandardNormal));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v / n;
        }
    }
}

impl SamplePlan {
    pub fn m_prime(&self) -> usize {
        self.m + self.d + 1
    }

    /// All m' frequency rows: the Gaussian block, then e_1..e_d, then 0.
    pub fn s_prime_rows(&self) -> Array2<f64> {
        let mp = self.m_prime();
        let mut rows = Array2::zeros((mp, self.d));
        rows.slice_mut(ndarray::s![..self.m, ..]).assign(&self.samples);
        for t in 0..self.d {
            rows[[self.m + t, t]] = 1.0;
        }
        rows
    }

    /// Slice shift vectors as rows: v, 2v, and 0 when slice_count = 3.
    pub fn slice_vectors(&self) -> Array2<f64> {
        let mut rows = Array2::zeros((self.slice_count, self.d));
        for t in 0..self.d {
            rows[[0, t]] = self.v[t];
            rows[[1, t]] = 2.0 * self.v[t];
        }
        rows
    }

    /// Same Gaussian rows, fresh projection vector (retry path for
    /// ill-separated pencil spectra). Deterministic in (seed, attempt).
    pub fn with_redrawn_v(&self, attempt: u32) -> SamplePlan {
        let mut rng = substream(&[self.seed, TAG_REDRAW, attempt as u64]);
        let mut plan = self.clone();
        plan.v = unit_sphere(self.d, &mut rng);
        plan
    }

    /// Largest per-coordinate frequency actually queried, next to the
    /// R*sqrt(log(m d)) scale the design predicts.
    pub fn report_cutoff(&self) -> CutoffReport {
        let rows = self.s_prime_rows();
        let shifts = self.slice_vectors();
        let mp = self.m_prime();
        let mut observed: f64 = 0.0;
        for n1 in 0..mp {
            for n2 in n1..mp {
                for l in 0..self.slice_count {
                    for t in 0..self.d {
                        let x = rows[[n1, t]] + rows[[n2, t]] + shifts[[l, t]];
                        observed = observed.max(x.abs());
                    }
                }
            }
        }
        let predicted = self.r * ((self.m * self.d).max(2) as f64).ln().sqrt();
        CutoffReport {
            observed,
            predicted,
        }
    }

    /// Text form: header `d k m R slice_count seed`, m sample rows, then v.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            self.d, self.k, self.m, self.r, self.slice_count, self.seed
        );
        for row in self.samples.rows() {
            let mut first = true;
            for x in row {
                if !first {
                    out.push(' ');
                }
                let _ = write!(out, "{x}");
                first = false;
            }
            out.push('\n');
        }
        let mut first = true;
        for x in &self.v {
            if !first {
                out.push(' ');
            }
            let _ = write!(out, "{x}");
            first = false;
        }
        out.push('\n');
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty plan".into()))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 6 {
            return Err(Error::Parse(format!(
                "plan header has {} fields, expected 6",
                toks.len()
            )));
        }
        let d: usize = parse(toks[0], "d")?;
        let k: usize = parse(toks[1], "k")?;
        let m: usize = parse(toks[2], "m")?;
        let r: f64 = parse(toks[3], "R")?;
        let slice_count: usize = parse(toks[4], "slice_count")?;
        let seed: u64 = parse(toks[5], "seed")?;
        let mut read_row = |what: &str| -> Result<Vec<f64>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what} row")))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| parse(t, "coordinate"))
                .collect::<Result<_>>()?;
            if vals.len() != d {
                return Err(Error::Parse(format!(
                    "{what} row has {} coordinates, expected {d}",
                    vals.len()
                )));
            }
            Ok(vals)
        };
        let mut samples = Array2::zeros((m, d));
        for i in 0..m {
            let row = read_row("sample")?;
            for t in 0..d {
                samples[[i, t]] = row[t];
            }
        }
        let v = Array1::from(read_row("projection-vector")?);
        Ok(SamplePlan {
            d,
            k,
            m,
            r,
            slice_count,
            seed,
            samples,
            v,
            eps_x: 0.25,
            delta_s: 0.1,
            delta_v: 0.1,
        })
    }
}

fn parse<T: std::str::FromStr>(tok: &str, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    tok.parse()
        .map_err(|e| Error::Parse(format!("plan field `{name}` = `{tok}`: {e}")))
}

#[derive(Debug, Clone, Copy)]
pub struct CutoffReport {
    pub observed: f64,
    pub predicted: f64,
}

/// Measurement tensor plus how many distinct frequency points producing it
/// actually cost (symmetric and coincident sums share oracle queries).
#[derive(Debug, Clone)]
pub struct TensorBuild {
    pub tensor: Tensor3,
    pub distinct_points: usize,
    pub cells: usize,
}

/// F~[n1,n2,l] = f~(s'_{n1} + s'_{n2} + shift_l) over all m' x m' x slice_count
/// cells. Symmetry in (n1, n2) is exact because the oracle memoizes per
/// frequency, so only the upper triangle is evaluated.
pub fn build_tensor<O: FrequencyOracle + ?Sized>(
    oracle: &mut O,
    plan: &SamplePlan,
) -> Result<TensorBuild> {
    if oracle.dim() != plan.d {
        return Err(Error::DimensionMismatch {
            expected: plan.d,
            got: oracle.dim(),
        });
    }
    let rows = plan.s_prime_rows();
    let shifts = plan.slice_vectors();
    let mp = plan.m_prime();
    let before = oracle.distinct_queries();
    let mut tensor = Tensor3::zeros([mp, mp, plan.slice_count]);
    let mut point = vec![0.0; plan.d];
    for n1 in 0..mp {
        for n2 in n1..mp {
            for l in 0..plan.slice_count {
                for t in 0..plan.d {
                    point[t] = rows[[n1, t]] + rows[[n2, t]] + shifts[[l, t]];
                }
                let val = oracle.query(&point)?;
                tensor.data_mut()[[n1, n2, l]] = val;
                tensor.data_mut()[[n2, n1, l]] = val;
            }
        }
    }
    Ok(TensorBuild {
        distinct_points: oracle.distinct_queries() - before,
        cells: mp * mp * plan.slice_count,
        tensor,
    })
}

/// Expected Gram matrix of the Gaussian frequency factor:
/// Y[j,j'] = exp(-pi^2 ||mu_j - mu_j'||^2 R^2 / 2), ones on the diagonal.
pub fn expected_gram_matrix(source: &SourceSet, r: f64) -> Result<Array2<Complex64>> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("r", "cutoff must be positive and finite"));
    }
    let k = source.k();
    let mut y = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            if i == j {
                y[[i, j]] = Complex64::new(1.0, 0.0);
                continue;
            }
            let d2: f64 = source
                .location(i)
                .iter()
                .zip(source.location(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let e = -0.5 * std::f64::consts::PI.powi(2) * d2 * r * r;
            y[[i, j]] = Complex64::new(e.exp(), 0.0);
        }
    }
    Ok(y)
}

/// Per-row Gershgorin radii sum_{j' != j} |Y[j,j']|: every eigenvalue of Y
/// lies within max radius of a diagonal entry.
pub fn gershgorin_radii(y: &Array2<Complex64>) -> Vec<f64> {
    (0..y.nrows())
        .map(|i| {
            (0..y.ncols())
                .filter(|&j| j != i)
                .map(|j| y[[i, j]].norm())
                .sum()
        })
        .collect()
}

/// The ground-truth Gaussian-block factor V_S[i,j] = e^{i pi <mu_j, s_i>}
/// on the plan's Gaussian rows only (diagnostic for conditioning claims).
pub fn gaussian_factor(source: &SourceSet, plan: &SamplePlan) -> Result<Array2<Complex64>> {
    vandermonde_rows(source, &plan.samples)
}

/// Same factor over the full augmented row set S'.
pub fn augmented_factor(source: &SourceSet, plan: &SamplePlan) -> Result<Array2<Complex64>> {
    vandermonde_rows(source, &plan.s_prime_rows())
}

fn vandermonde_rows(source: &SourceSet, rows: &Array2<f64>) -> Result<Array2<Complex64>> {
    if source.d() != rows.ncols() {
        return Err(Error::DimensionMismatch {
            expected: source.d(),
            got: rows.ncols(),
        });
    }
    let k = source.k();
    let mut v = Array2::zeros((rows.nrows(), k));
    for i in 0..rows.nrows() {
        for j in 0..k {
            let dot: f64 = source
                .location(j)
                .iter()
                .zip(rows.row(i).iter())
                .map(|(a, b)| a * b)
                .sum();
            v[[i, j]] = Complex64::cis(std::f64::consts::PI * dot);
        }
    }
    Ok(v)
}
