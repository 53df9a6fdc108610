//! Point-source configurations and the noisy bandlimited measurement oracle.
//!
//! A signal is a superposition of k Dirac sources at locations in [-1,1]^d
//! with complex weights; its measurement at frequency s is
//! f(s) = sum_j w_j e^{i pi <mu_j, s>}, observed through bounded noise.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{mix64, mix_seed, unit_f64};

/// Ground-truth sources: k locations in [-1,1]^d and complex weights with
/// magnitudes in (0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSet {
    d: usize,
    locations: Array2<f64>,
    weights: Vec<Complex64>,
}

impl SourceSet {
    pub fn new(locations: Array2<f64>, weights: Vec<Complex64>) -> Result<Self> {
        let (k, d) = locations.dim();
        if d == 0 {
            return Err(Error::invalid("d", "dimension must be positive"));
        }
        if k == 0 || weights.len() != k {
            return Err(Error::invalid(
                "weights",
                format!("need one weight per location ({} vs {})", weights.len(), k),
            ));
        }
        for &x in locations.iter() {
            if !(-1.0..=1.0).contains(&x) {
                return Err(Error::invalid(
                    "locations",
                    format!("coordinate {x} outside [-1,1]"),
                ));
            }
        }
        for (j, w) in weights.iter().enumerate() {
            let a = w.norm();
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::invalid(
                    "weights",
                    format!("|w_{j}| = {a} outside (0,1]"),
                ));
            }
        }
        let s = SourceSet {
            d,
            locations,
            weights,
        };
        if s.min_separation() <= 0.0 {
            return Err(Error::invalid("locations", "coincident source locations"));
        }
        Ok(s)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn locations(&self) -> &Array2<f64> {
        &self.locations
    }

    pub fn location(&self, j: usize) -> ArrayView1<'_, f64> {
        self.locations.row(j)
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn w_min(&self) -> f64 {
        self.weights.iter().map(|w| w.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn w_max(&self) -> f64 {
        self.weights.iter().map(|w| w.norm()).fold(0.0, f64::max)
    }

    /// Minimal pairwise Euclidean separation; +inf for a single source.
    pub fn min_separation(&self) -> f64 {
        let k = self.k();
        if k < 2 {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        for i in 0..k {
            for j in i + 1..k {
                let d2: f64 = self
                    .locations
                    .row(i)
                    .iter()
                    .zip(self.locations.row(j).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                best = best.min(d2.sqrt());
            }
        }
        best
    }

    /// Noiseless measurement f(s) = sum_j w_j e^{i pi <mu_j, s>}.
    pub fn measure(&self, s: &[f64]) -> Complex64 {
        assert_eq!(s.len(), self.d, "frequency dimension mismatch");
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, w) in self.weights.iter().enumerate() {
            let dot: f64 = self
                .locations
                .row(j)
                .iter()
                .zip(s.iter())
                .map(|(m, t)| m * t)
                .sum();
            acc += w * Complex64::cis(std::f64::consts::PI * dot);
        }
        acc
    }

    /// Line-oriented text form: header `d k`, then one `w_re w_im mu_1 .. mu_d`
    /// line per source, shortest round-trip decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.d, self.k());
        for (j, w) in self.weights.iter().enumerate() {
            let _ = write!(out, "{} {}", w.re, w.im);
            for x in self.locations.row(j) {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty source set".into()))?;
        let mut it = header.split_whitespace();
        let d: usize = parse_field(it.next(), "d")?;
        let k: usize = parse_field(it.next(), "k")?;
        let mut locations = Array2::zeros((k, d));
        let mut weights = Vec::with_capacity(k);
        for j in 0..k {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing source line {j}")))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad float `{t}`: {e}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != d + 2 {
                return Err(Error::Parse(format!(
                    "source line {j} has {} fields, expected {}",
                    vals.len(),
                    d + 2
                )));
            }
            weights.push(Complex64::new(vals[0], vals[1]));
            for t in 0..d {
                locations[[j, t]] = vals[t + 2];
            }
        }
        SourceSet::new(locations, weights)
    }
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let tok = tok.ok_or_else(|| Error::Parse(format!("missing field `{name}`")))?;
    tok.parse()
        .map_err(|e| Error::Parse(format!("field `{name}` = `{tok}`: {e}")))
}

/// Law for the random weights of `random_instance`: magnitudes uniform in
/// [0.1, 1.1] clipped at 1 (so the (0,1] weight invariant holds while the
/// ensemble matches the experimental setup), phase zero or uniform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightLaw {
    #[default]
    RealPositive,
    UniformPhase,
}

const PLACE_TRIES: usize = 200;
const RESTARTS: usize = 1000;

/// Draws k sources whose minimal separation lands in [delta_target, 2 delta_target].
///
/// k-1 points are placed by uniform rejection (pairwise >= delta_target); the
/// last point is anchored at distance exactly delta_target from one of them,
/// which pins the minimum. Pure rejection on all k points would almost never
/// hit the required window at small delta_target.
pub fn random_instance<R: Rng + ?Sized>(
    d: usize,
    k: usize,
    delta_target: f64,
    weight_law: WeightLaw,
    rng: &mut R,
) -> Result<SourceSet> {
    if d == 0 {
        return Err(Error::invalid("d", "dimension must be positive"));
    }
    if k == 0 {
        return Err(Error::invalid("k", "need at least one source"));
    }
    if !(delta_target > 0.0 && delta_target.is_finite()) {
        return Err(Error::invalid("delta_target", "must be positive and finite"));
    }

    let mut locations = Array2::zeros((k, d));
    if k == 1 {
        for t in 0..d {
            locations[[0, t]] = rng.random_range(-1.0..=1.0);
        }
    } else {
        let placed = place_separated(d, k, delta_target, rng)?;
        for (j, p) in placed.iter().enumerate() {
            for t in 0..d {
                locations[[j, t]] = p[t];
            }
        }
    }

    let weights = (0..k)
        .map(|_| {
            let mag = f64::min(rng.random_range(0.1..1.1), 1.0);
            let phase = match weight_law {
                WeightLaw::RealPositive => 0.0,
                WeightLaw::UniformPhase => {
                    rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
                }
            };
            Complex64::from_polar(mag, phase)
        })
        .collect();

    SourceSet::new(locations, weights)
}

fn place_separated<R: Rng + ?Sized>(
    d: usize,
    k: usize,
    delta: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    // Tiny inflation keeps the anchored pair's rounded distance >= delta.
    let anchor_dist = delta * (1.0 + 1e-12);
    'restart: for _ in 0..RESTARTS {
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(k);
        while pts.len() < k - 1 {
            let mut ok = false;
            for _ in 0..PLACE_TRIES {
                let cand: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
                if pts.iter().all(|p| dist(p, &cand) >= delta) {
                    pts.push(cand);
                    ok = true;
                    break;
                }
            }
            if !ok {
                continue 'restart;
            }
        }
        for _ in 0..PLACE_TRIES {
            let anchor = rng.random_range(0..pts.len());
            let dir = unit_direction(d, rng);
            let cand: Vec<f64> = (0..d)
                .map(|t| pts[anchor][t] + anchor_dist * dir[t])
                .collect();
            let in_box = cand.iter().all(|&x| (-1.0..=1.0).contains(&x));
            let separated = pts
                .iter()
                .enumerate()
                .all(|(j, p)| j == anchor || dist(p, &cand) >= delta);
            if in_box && separated {
                pts.push(cand);
                // Shuffle so the anchored pair is not always in the same rows.
                for i in (1..pts.len()).rev() {
                    pts.swap(i, rng.random_range(0..=i));
                }
                return Ok(pts);
            }
        }
    }
    Err(Error::InfeasibleSeparation {
        d,
        k,
        delta_target: delta,
        restarts: RESTARTS,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn unit_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Bounded perturbation of the ideal measurement.
#[derive(Clone)]
pub enum NoiseModel {
    None,
    /// Uniform on the complex disk of radius eps_z, one deterministic draw
    /// per distinct frequency (a fixed function z(s), not per-query noise).
    UniformDisk,
    /// Caller-supplied deterministic perturbation; must satisfy |z(s)| <= eps_z.
    Custom(Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>),
}

impl std::fmt::Debug for NoiseModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseModel::None => f.write_str("None"),
            NoiseModel::UniformDisk => f.write_str("UniformDisk"),
            NoiseModel::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Any source of measurements f~(s) the recovery pipeline can consume.
pub trait FrequencyOracle {
    fn dim(&self) -> usize;
    /// Evaluates the (noisy) measurement at frequency s. Implementations
    /// must return the same value on repeated queries of the same s.
    fn query(&mut self, s: &[f64]) -> Result<Complex64>;
    /// Number of distinct frequency points evaluated so far.
    fn distinct_queries(&self) -> usize;
}

/// Measurement oracle over a ground-truth `SourceSet`: f~(s) = f(s) + z(s)
/// with |z| <= eps_z. Values are memoized per frequency, and the disk noise
/// is a pure function of (seed, s), so concurrent or reordered evaluation
/// cannot produce two different draws for one frequency.
#[derive(Debug, Clone)]
pub struct MeasurementOracle {
    source: SourceSet,
    eps_z: f64,
    noise: NoiseModel,
    seed: u64,
    memo: HashMap<Vec<u64>, Complex64>,
}

impl MeasurementOracle {
    pub fn new(source: SourceSet, eps_z: f64, seed: u64) -> Self {
        let noise = if eps_z == 0.0 {
            NoiseModel::None
        } else {
            NoiseModel::UniformDisk
        };
        Self::with_noise(source, eps_z, noise, seed)
    }

    pub fn with_noise(source: SourceSet, eps_z: f64, noise: NoiseModel, seed: u64) -> Self {
        assert!(eps_z >= 0.0, "noise bound must be nonnegative");
        MeasurementOracle {
            source,
            eps_z,
            noise,
            seed,
            memo: HashMap::new(),
        }
    }

    pub fn source(&self) -> &SourceSet {
        &self.source
    }

    pub fn eps_z(&self) -> f64 {
        self.eps_z
    }

    /// Noisy measurement at s (memoized).
    pub fn evaluate(&mut self, s: &[f64]) -> Complex64 {
        let key: Vec<u64> = s.iter().map(|x| x.to_bits()).collect();
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let z = match &self.noise {
            NoiseModel::None => Complex64::new(0.0, 0.0),
            NoiseModel::UniformDisk => disk_draw(self.seed, &key, self.eps_z),
            NoiseModel::Custom(f) => {
                let z = f(s);
                assert!(
                    z.norm() <= self.eps_z * (1.0 + 1e-9),
                    "custom noise hook violated its bound: |z| = {} > eps_z = {}",
                    z.norm(),
                    self.eps_z
                );
                z
            }
        };
        let v = self.source.measure(s) + z;
        self.memo.insert(key, v);
        v
    }
}

/// Uniform draw from the complex disk of radius eps, derived from the seed
/// and the exact bits of the frequency point.
fn disk_draw(seed: u64, key: &[u64], eps: f64) -> Complex64 {
    let mut parts = Vec::with_capacity(key.len() + 1);
    parts.push(seed);
    parts.extend_from_slice(key);
    let h = mix_seed(&parts);
    let r = eps * unit_f64(mix64(h ^ 0x517c_c1b7_2722_0a95)).sqrt();
    let theta = 2.0 * std::f64::consts::PI * unit_f64(mix64(h ^ 0x6c62_272e_07bb_0142));
    Complex64::from_polar(r, theta)
}

impl FrequencyOracle for MeasurementOracle {
    fn dim(&self) -> usize {
        self.source.d()
    }

    fn query(&mut self, s: &[f64]) -> Result<Complex64> {
        if s.len() != self.source.d() {
            return Err(Error::DimensionMismatch {
                expected: self.source.d(),
                got: s.len(),
            });
        }
        Ok(self.evaluate(s))
    }

    fn distinct_queries(&self) -> usize {
        self.memo.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_abs_diff_eq;

    fn simple_set() -> SourceSet {
        let locations =
            Array2::from_shape_vec((2, 2), vec![0.0, 0.0, 0.3, 0.4]).unwrap();
        SourceSet::new(locations, vec![Complex64::new(0.5, 0.0), Complex64::new(0.2, 0.1)])
            .unwrap()
    }

    #[test]
    fn separation_three_four_five() {
        assert_abs_diff_eq!(simple_set().min_separation(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn separation_single_source_is_infinite() {
        let s = SourceSet::new(
            Array2::from_shape_vec((1, 3), vec![0.1, 0.2, 0.3]).unwrap(),
            vec![Complex64::new(1.0, 0.0)],
        )
        .unwrap();
        assert_eq!(s.min_separation(), f64::INFINITY);
    }

    #[test]
    fn separation_matches_brute_force_on_random_instance() {
        let mut rng = substream(&[41]);
        let s = random_instance(3, 8, 0.2, WeightLaw::default(), &mut rng).unwrap();
        let mut brute = f64::INFINITY;
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    let d2: f64 = (0..3)
                        .map(|t| {
                            (s.locations()[[i, t]] - s.locations()[[j, t]]).powi(2)
                        })
                        .sum();
                    brute = brute.min(d2.sqrt());
                }
            }
        }
        assert_eq!(s.min_separation(), brute);
    }

    #[test]
    fn measure_at_zero_sums_weights() {
        let s = simple_set();
        let got = s.measure(&[0.0, 0.0]);
        assert_abs_diff_eq!(got.re, 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(got.im, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn measure_unit_phase() {
        let s = SourceSet::new(
            Array2::from_shape_vec((1, 2), vec![1.0, 0.0]).unwrap(),
            vec![Complex64::new(1.0, 0.0)],
        )
        .unwrap();
        let got = s.measure(&[1.0, 0.0]);
        assert_abs_diff_eq!(got.re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(got.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn measure_matches_direct_sum_on_random_points() {
        let mut rng = substream(&[42]);
        let s = random_instance(3, 3, 0.1, WeightLaw::UniformPhase, &mut rng).unwrap();
        for _ in 0..20 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let mut direct = Complex64::new(0.0, 0.0);
            for j in 0..3 {
                let dot: f64 = (0..3).map(|t| s.locations()[[j, t]] * q[t]).sum();
                direct += s.weights()[j]
                    * Complex64::new(0.0, std::f64::consts::PI * dot).exp();
            }
            let got = s.measure(&q);
            assert_abs_diff_eq!(got.re, direct.re, epsilon = 1e-12);
            assert_abs_diff_eq!(got.im, direct.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn random_instance_hits_separation_window() {
        let mut rng = substream(&[7]);
        for (d, k, delta) in [(4, 8, 0.05), (2, 8, 0.05), (1, 2, 1.9), (2, 5, 0.3)] {
            let s = random_instance(d, k, delta, WeightLaw::default(), &mut rng).unwrap();
            let sep = s.min_separation();
            assert!(
                sep >= delta && sep <= 2.0 * delta,
                "d={d} k={k} delta={delta}: separation {sep} outside window"
            );
        }
    }

    #[test]
    fn random_instance_d1_extreme_separation_puts_points_near_edges() {
        let mut rng = substream(&[8]);
        let s = random_instance(1, 2, 1.9, WeightLaw::default(), &mut rng).unwrap();
        let mut xs: Vec<f64> = s.locations().iter().copied().collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(xs[0] <= -0.9 && xs[1] >= 0.9);
    }

    #[test]
    fn random_instance_infeasible_errors() {
        let mut rng = substream(&[9]);
        let err = random_instance(2, 2, 5.0, WeightLaw::default(), &mut rng).unwrap_err();
        assert!(matches!(err, Error::InfeasibleSeparation { .. }));
    }

    #[test]
    fn random_instance_weight_magnitudes_in_range() {
        let mut rng = substream(&[10]);
        let s = random_instance(2, 8, 0.1, WeightLaw::default(), &mut rng).unwrap();
        assert!(s.w_min() >= 0.1 && s.w_max() <= 1.0);
        for w in s.weights() {
            assert_eq!(w.im, 0.0);
        }
    }

    #[test]
    fn oracle_magnitude_bounded_by_weight_mass_plus_noise() {
        let mut rng = substream(&[11]);
        let s = random_instance(2, 4, 0.2, WeightLaw::UniformPhase, &mut rng).unwrap();
        let bound: f64 = s.weights().iter().map(|w| w.norm()).sum::<f64>() + 0.3;
        let mut oracle = MeasurementOracle::new(s, 0.3, 99);
        for _ in 0..50 {
            let q: Vec<f64> = (0..2).map(|_| rng.random_range(-10.0..10.0)).collect();
            assert!(oracle.evaluate(&q).norm() <= bound + 1e-12);
        }
    }

    #[test]
    fn oracle_conjugate_symmetry_for_real_weights_without_noise() {
        let mut rng = substream(&[12]);
        let s = random_instance(3, 4, 0.2, WeightLaw::RealPositive, &mut rng).unwrap();
        let mut oracle = MeasurementOracle::new(s, 0.0, 0);
        for _ in 0..20 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let neg: Vec<f64> = q.iter().map(|x| -x).collect();
            let a = oracle.evaluate(&q);
            let b = oracle.evaluate(&neg);
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-12);
            assert_abs_diff_eq!(a.im, -b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn oracle_noise_bounded_and_memoized() {
        let mut rng = substream(&[13]);
        let s = random_instance(2, 3, 0.2, WeightLaw::default(), &mut rng).unwrap();
        let clean = s.clone();
        let mut oracle = MeasurementOracle::new(s, 0.05, 1234);
        let q = [0.77, -2.13];
        let first = oracle.evaluate(&q);
        assert_eq!(first, oracle.evaluate(&q), "memoized value must not change");
        assert_eq!(oracle.distinct_queries(), 1);
        assert!((first - clean.measure(&q)).norm() <= 0.05);
    }

    #[test]
    fn oracle_noise_is_query_order_independent() {
        let mut rng = substream(&[14]);
        let s = random_instance(2, 3, 0.2, WeightLaw::default(), &mut rng).unwrap();
        let qs: Vec<[f64; 2]> = (0..10)
            .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let mut fwd = MeasurementOracle::new(s.clone(), 0.1, 5);
        let mut rev = MeasurementOracle::new(s, 0.1, 5);
        let a: Vec<Complex64> = qs.iter().map(|q| fwd.evaluate(q)).collect();
        let b: Vec<Complex64> = qs.iter().rev().map(|q| rev.evaluate(q)).collect();
        for (x, y) in a.iter().zip(b.iter().rev()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn custom_noise_hook_is_used() {
        let s = simple_set();
        let clean = s.clone();
        let hook = Arc::new(|_: &[f64]| Complex64::new(0.02, -0.01));
        let mut oracle = MeasurementOracle::with_noise(s, 0.05, NoiseModel::Custom(hook), 0);
        let q = [0.5, 0.5];
        let got = oracle.evaluate(&q) - clean.measure(&q);
        assert_abs_diff_eq!(got.re, 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(got.im, -0.01, epsilon = 1e-15);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut rng = substream(&[15]);
        let s = random_instance(3, 5, 0.2, WeightLaw::UniformPhase, &mut rng).unwrap();
        let back = SourceSet::from_text(&s.to_text()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn from_text_rejects_malformed_input() {
        assert!(SourceSet::from_text("").is_err());
        assert!(SourceSet::from_text("2 1\n0.5 0.0 0.1").is_err());
        assert!(SourceSet::from_text("2 1\n0.5 zero 0.1 0.2").is_err());
    }

    #[test]
    fn new_rejects_bad_weights_and_coordinates() {
        let loc = Array2::from_shape_vec((1, 1), vec![0.0]).unwrap();
        assert!(SourceSet::new(loc.clone(), vec![Complex64::new(0.0, 0.0)]).is_err());
        assert!(SourceSet::new(loc, vec![Complex64::new(1.5, 0.0)]).is_err());
        let far = Array2::from_shape_vec((1, 1), vec![1.5]).unwrap();
        assert!(SourceSet::new(far, vec![Complex64::new(0.5, 0.0)]).is_err());
    }
}
