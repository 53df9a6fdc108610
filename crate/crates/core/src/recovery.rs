//! End-to-end recovery: draw a plan sized for the target accuracy, build
//! the measurement tensor, decompose it, read locations off the basis and
//! zero rows of the factor, then fit weights by least squares. Also the
//! matching metrics used to score an estimate against a reference set.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jennrich::{
    sep_lower_bound, tensor_decomp_with, DecompOptions, DecompositionDiagnostics,
    DEFAULT_PENCIL_TOL_REL, DEFAULT_RANK_TOL_REL, DEFAULT_SEP_TOL,
};
use crate::kernels::{cond2, solve_columns};
use crate::model::{FrequencyOracle, SourceSet};
use crate::sampling::{build_tensor, choose_cutoff, choose_sample_count, draw_plan, SamplePlan};
use crate::tensor::Tensor3;

/// Columns whose last entry is smaller than this cannot be normalized.
pub const NORM_TOL: f64 = 1e-6;
/// Weight fits are refused past this Gram condition number.
pub const WEIGHT_COND_MAX: f64 = 1e8;

/// Divide each column by its last entry; the last row becomes exactly 1.
pub fn normalize_columns(v: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let (n, k) = v.dim();
    if n == 0 {
        return Err(Error::ShapeMismatch {
            op: "normalize_columns",
            detail: "empty matrix".to_string(),
        });
    }
    let mut out = v.clone();
    for j in 0..k {
        let last = out[[n - 1, j]];
        if last.norm() < NORM_TOL {
            return Err(Error::VanishingLastEntry {
                col: j,
                abs: last.norm(),
                tol: NORM_TOL,
            });
        }
        for i in 0..n {
            out[[i, j]] /= last;
        }
        out[[n - 1, j]] = Complex64::new(1.0, 0.0);
    }
    Ok(out)
}

/// Locations from a normalized factor: rows m..m+d-1 hold e^{i pi mu_t},
/// so mu_t = arg/pi in (-1, 1]. An exact -1 (the atan2 branch cut at the
/// negative real axis with negative zero imaginary part) is folded to +1,
/// the representative the location domain uses. Returns the locations and
/// the worst deviation of those entries from unit modulus.
pub fn read_off(vnorm: &Array2<Complex64>, d: usize) -> Result<(Array2<f64>, f64)> {
    let (n, k) = vnorm.dim();
    if n < d + 1 {
        return Err(Error::ShapeMismatch {
            op: "read_off",
            detail: format!("{n} rows cannot hold {d} basis rows plus the zero row"),
        });
    }
    let m = n - d - 1;
    let mut locations = Array2::zeros((k, d));
    let mut modulus_dev: f64 = 0.0;
    for j in 0..k {
        for t in 0..d {
            let z = vnorm[[m + t, j]];
            let mut mu = z.arg() / PI;
            if mu == -1.0 {
                mu = 1.0;
            }
            locations[[j, t]] = mu;
            modulus_dev = modulus_dev.max((z.norm() - 1.0).abs());
        }
    }
    Ok((locations, modulus_dev))
}

/// Least-squares weights for the model sum_j w_j a_j (x) a_j (x) b_j,
/// where a_j is column j of the normalized factor and b_j is rebuilt from
/// the estimated locations at the given slice shifts. The k x k normal
/// equations use the Gram identity <a(x)a(x)b, a'(x)a'(x)b'> =
/// (a^H a')^2 (b^H b'), so the tensor is touched once for the right-hand
/// side. Returns (weights, residual, gram condition number).
pub fn fit_weights(
    f: &Tensor3,
    vnorm: &Array2<Complex64>,
    locations: &Array2<f64>,
    shifts: &Array2<f64>,
) -> Result<(Vec<Complex64>, f64, f64)> {
    let (n, k) = vnorm.dim();
    let [n1, n2, n3] = f.dims();
    if n1 != n || n2 != n || n3 != shifts.nrows() || locations.nrows() != k {
        return Err(Error::ShapeMismatch {
            op: "fit_weights",
            detail: format!(
                "tensor {n1}x{n2}x{n3}, factor {n}x{k}, {} locations, {} shifts",
                locations.nrows(),
                shifts.nrows()
            ),
        });
    }
    if locations.ncols() != shifts.ncols() {
        return Err(Error::DimensionMismatch {
            expected: locations.ncols(),
            got: shifts.ncols(),
        });
    }

    let v2 = Array2::from_shape_fn((n3, k), |(l, j)| {
        let dot: f64 = (0..locations.ncols())
            .map(|t| locations[[j, t]] * shifts[[l, t]])
            .sum();
        Complex64::cis(PI * dot)
    });

    let v_conj = vnorm.mapv(|z| z.conj());
    let v2_conj = v2.mapv(|z| z.conj());
    let a = v_conj.t().dot(vnorm);
    let b = v2_conj.t().dot(&v2);
    let gram = Array2::from_shape_fn((k, k), |(i, j)| a[[i, j]] * a[[i, j]] * b[[i, j]]);

    let cond = cond2(&gram)?;
    if cond > WEIGHT_COND_MAX {
        return Err(Error::IllConditionedWeights {
            cond,
            max: WEIGHT_COND_MAX,
        });
    }

    let contracted = f.contract(&v_conj, &v_conj, &v2_conj)?;
    let rhs = Array1::from_iter((0..k).map(|j| contracted.data()[[j, j, j]]));

    let rhs_col = rhs
        .clone()
        .into_shape_with_order((k, 1))
        .expect("k x 1 reshape");
    let w = solve_columns(&gram, &rhs_col)?.column(0).to_owned();

    // Residual by explicit reconstruction: the algebraic shortcut
    // ||F||^2 - 2 Re(w^H r) + w^H G w cancels catastrophically when the
    // fit is near-exact, flooring the reported value around
    // ||F|| * sqrt(machine epsilon).
    let c = Array2::from_shape_fn((n3, k), |(l, j)| v2[[l, j]] * w[j]);
    let fitted = crate::tensor::factor_product(vnorm, vnorm, &c)?;
    let residual_sq: f64 = f
        .data()
        .iter()
        .zip(fitted.data().iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();

    Ok((w.to_vec(), residual_sq.sqrt(), cond))
}

mod assign {
    use ndarray::Array2;

    fn try_augment(
        adj: &[Vec<usize>],
        i: usize,
        seen: &mut [bool],
        match_to: &mut [Option<usize>],
    ) -> bool {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                let free = match match_to[j] {
                    None => true,
                    Some(owner) => try_augment(adj, owner, seen, match_to),
                };
                if free {
                    match_to[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }

    /// Perfect matching using only edges with dist <= thr; returns the
    /// row -> column assignment when one exists.
    pub fn matching_under(dist: &Array2<f64>, thr: f64) -> Option<Vec<usize>> {
        let k = dist.nrows();
        let adj: Vec<Vec<usize>> = (0..k)
            .map(|i| (0..k).filter(|&j| dist[[i, j]] <= thr).collect())
            .collect();
        let mut match_to: Vec<Option<usize>> = vec![None; k];
        for i in 0..k {
            let mut seen = vec![false; k];
            if !try_augment(&adj, i, &mut seen, &mut match_to) {
                return None;
            }
        }
        let mut perm = vec![0usize; k];
        for (j, owner) in match_to.iter().enumerate() {
            perm[owner.expect("perfect matching")] = j;
        }
        Some(perm)
    }

    /// Smallest threshold admitting a perfect matching, with a witness
    /// assignment: binary search over the sorted distinct distances.
    pub fn bottleneck(dist: &Array2<f64>) -> (f64, Vec<usize>) {
        let mut levels: Vec<f64> = dist.iter().copied().collect();
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        levels.dedup();
        let (mut lo, mut hi) = (0usize, levels.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if matching_under(dist, levels[mid]).is_some() {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let perm = matching_under(dist, levels[lo]).expect("feasible at max distance");
        (levels[lo], perm)
    }

    /// Minimum-total-cost assignment by the shortest augmenting path
    /// method with potentials, O(k^3). Returns (total, row -> column).
    pub fn min_sum(cost: &Array2<f64>) -> (f64, Vec<usize>) {
        let n = cost.nrows();
        let mut u = vec![0.0f64; n + 1];
        let mut v = vec![0.0f64; n + 1];
        let mut p = vec![0usize; n + 1];
        let mut way = vec![0usize; n + 1];
        for i in 1..=n {
            p[0] = i;
            let mut j0 = 0usize;
            let mut minv = vec![f64::INFINITY; n + 1];
            let mut used = vec![false; n + 1];
            loop {
                used[j0] = true;
                let i0 = p[j0];
                let mut delta = f64::INFINITY;
                let mut j1 = 0usize;
                for j in 1..=n {
                    if !used[j] {
                        let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                        if cur < minv[j] {
                            minv[j] = cur;
                            way[j] = j0;
                        }
                        if minv[j] < delta {
                            delta = minv[j];
                            j1 = j;
                        }
                    }
                }
                for j in 0..=n {
                    if used[j] {
                        u[p[j]] += delta;
                        v[j] -= delta;
                    } else {
                        minv[j] -= delta;
                    }
                }
                j0 = j1;
                if p[j0] == 0 {
                    break;
                }
            }
            loop {
                let j1 = way[j0];
                p[j0] = p[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }
        let mut perm = vec![0usize; n];
        for j in 1..=n {
            if p[j] > 0 {
                perm[p[j] - 1] = j - 1;
            }
        }
        let total = (0..n).map(|i| cost[[i, perm[i]]]).sum();
        (total, perm)
    }
}

fn distance_matrix(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            op: "matched_error",
            detail: format!("{:?} vs {:?}", a.dim(), b.dim()),
        });
    }
    if a.nrows() == 0 {
        return Err(Error::ShapeMismatch {
            op: "matched_error",
            detail: "empty point sets".to_string(),
        });
    }
    let k = a.nrows();
    Ok(Array2::from_shape_fn((k, k), |(i, j)| {
        a.row(i)
            .iter()
            .zip(b.row(j).iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }))
}

/// min over permutations of max_j ||a_j - b_{pi(j)}||_2.
pub fn matched_error(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    Ok(assign::bottleneck(&distance_matrix(a, b)?).0)
}

/// As `matched_error` but also returns an optimal row -> column pairing.
pub fn matched_assignment(a: &Array2<f64>, b: &Array2<f64>) -> Result<(f64, Vec<usize>)> {
    Ok(assign::bottleneck(&distance_matrix(a, b)?))
}

/// min over permutations of sum_j ||a_j - b_{pi(j)}||_2.
pub fn sum_matched_error(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    Ok(assign::min_sum(&distance_matrix(a, b)?).0)
}

/// As `sum_matched_error` but also returns an optimal row -> column pairing.
pub fn sum_matched_assignment(a: &Array2<f64>, b: &Array2<f64>) -> Result<(f64, Vec<usize>)> {
    Ok(assign::min_sum(&distance_matrix(a, b)?))
}

#[derive(Debug, Clone)]
pub struct RecoverOptions {
    /// Explicit eigenvalue separation floor; overrides `delta_hint`.
    pub sep_tol: Option<f64>,
    /// Location separation the instance is believed to satisfy; sets the
    /// separation floor through `sep_lower_bound` when `sep_tol` is unset.
    pub delta_hint: Option<f64>,
    /// Projection redraws allowed after the initial attempt.
    pub max_retries: usize,
    pub rank_tol_rel: f64,
    pub pencil_tol_rel: f64,
}

impl Default for RecoverOptions {
    fn default() -> Self {
        RecoverOptions {
            sep_tol: None,
            delta_hint: None,
            max_retries: 3,
            rank_tol_rel: DEFAULT_RANK_TOL_REL,
            pencil_tol_rel: DEFAULT_PENCIL_TOL_REL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryDiagnostics {
    pub decomposition: DecompositionDiagnostics,
    pub weight_residual: f64,
    pub weight_cond: f64,
    /// Worst deviation from unit modulus among the factor entries the
    /// locations were read from.
    pub basis_modulus_dev: f64,
    /// Pipeline attempts executed (1 = no projection redraw needed).
    pub attempts: usize,
    pub distinct_points: usize,
    pub cells: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    /// k x d, coordinates in (-1, 1].
    pub locations: Array2<f64>,
    pub weights: Vec<Complex64>,
    /// Filled by `score_against`.
    pub matched_error: Option<f64>,
    pub weight_error: Option<f64>,
    pub diagnostics: RecoveryDiagnostics,
}

impl RecoveryResult {
    /// Bottleneck-match the estimate to a reference set and record the
    /// location and weight errors under that pairing.
    pub fn score_against(&mut self, truth: &SourceSet) -> Result<()> {
        let (err, perm) = matched_assignment(&self.locations, truth.locations())?;
        let werr = self
            .weights
            .iter()
            .enumerate()
            .map(|(j, w)| (w - truth.weights()[perm[j]]).norm())
            .fold(0.0f64, f64::max);
        self.matched_error = Some(err);
        self.weight_error = Some(werr);
        Ok(())
    }
}

fn attempt_once<O: FrequencyOracle + ?Sized>(
    oracle: &mut O,
    plan: &SamplePlan,
    k: usize,
    decomp_opts: &DecompOptions,
) -> Result<RecoveryResult> {
    let built = build_tensor(oracle, plan).map_err(|e| Error::at_stage("build_tensor", e))?;
    let decomp = tensor_decomp_with(&built.tensor, k, decomp_opts)
        .map_err(|e| Error::at_stage("tensor_decomp", e))?;
    let vnorm =
        normalize_columns(&decomp.vhat).map_err(|e| Error::at_stage("normalize_columns", e))?;
    let (locations, modulus_dev) =
        read_off(&vnorm, plan.d).map_err(|e| Error::at_stage("read_off", e))?;
    let (weights, residual, cond) =
        fit_weights(&built.tensor, &vnorm, &locations, &plan.slice_vectors())
            .map_err(|e| Error::at_stage("fit_weights", e))?;
    Ok(RecoveryResult {
        locations,
        weights,
        matched_error: None,
        weight_error: None,
        diagnostics: RecoveryDiagnostics {
            decomposition: decomp.diagnostics,
            weight_residual: residual,
            weight_cond: cond,
            basis_modulus_dev: modulus_dev,
            attempts: 1,
            distinct_points: built.distinct_points,
            cells: built.cells,
            warnings: Vec::new(),
        },
    })
}

/// Run the pipeline on a fixed plan. When the pencil spectrum is separated
/// below the floor, the projection vector is redrawn (up to
/// `opts.max_retries` times) and the attempt with the smallest weight-fit
/// residual wins; failures retry the same way and only propagate when no
/// attempt produced an estimate.
pub fn recover_with_plan<O: FrequencyOracle + ?Sized>(
    oracle: &mut O,
    plan: &SamplePlan,
    k: usize,
    opts: &RecoverOptions,
) -> Result<RecoveryResult> {
    let sep_tol = opts.sep_tol.unwrap_or_else(|| {
        opts.delta_hint
            .map(|dh| sep_lower_bound(dh, plan.d, k, plan.delta_v))
            .unwrap_or(DEFAULT_SEP_TOL)
    });
    let decomp_opts = DecompOptions {
        rank_tol_rel: opts.rank_tol_rel,
        pencil_tol_rel: opts.pencil_tol_rel,
        sep_tol,
    };

    let mut warnings: Vec<String> = Vec::new();
    let mut best: Option<RecoveryResult> = None;
    let mut last_err: Option<Error> = None;

    for attempt in 0..=opts.max_retries {
        let current = if attempt == 0 {
            plan.clone()
        } else {
            plan.with_redrawn_v(attempt as u32)
        };
        match attempt_once(oracle, &current, k, &decomp_opts) {
            Ok(mut cand) => {
                cand.diagnostics.attempts = attempt + 1;
                if cand.diagnostics.decomposition.sep_d >= sep_tol {
                    cand.diagnostics.warnings.extend(warnings);
                    return Ok(cand);
                }
                warnings.push(format!(
                    "attempt {}: pencil separation {:.3e} below floor {:.3e}",
                    attempt + 1,
                    cand.diagnostics.decomposition.sep_d,
                    sep_tol
                ));
                let better = best
                    .as_ref()
                    .map(|b| cand.diagnostics.weight_residual < b.diagnostics.weight_residual)
                    .unwrap_or(true);
                if better {
                    best = Some(cand);
                }
            }
            Err(e) => {
                warnings.push(format!("attempt {} failed: {e}", attempt + 1));
                last_err = Some(e);
            }
        }
    }

    // Exhausted the redraw budget with every spectrum below the floor:
    // proceed with the lowest weight-fit residual rather than failing.
    match best {
        Some(mut res) => {
            res.diagnostics.attempts = opts.max_retries + 1;
            warnings.push(
                "separation floor never reached; keeping the attempt with the smallest \
                 weight-fit residual"
                    .to_string(),
            );
            res.diagnostics.warnings.extend(warnings);
            Ok(res)
        }
        None => Err(last_err.expect("no attempts ran")),
    }
}

/// Size a plan from the target accuracy and failure budgets, then recover:
/// cutoff from (d, k, delta_hint, eps_x), sample count from
/// (k, eps_x, delta_s, d), two tensor slices, separation floor from
/// `sep_lower_bound(delta_hint, d, k, delta_v)`.
pub fn recover<O: FrequencyOracle + ?Sized>(
    oracle: &mut O,
    d: usize,
    k: usize,
    delta_hint: f64,
    eps_x: f64,
    delta_s: f64,
    delta_v: f64,
    seed: u64,
) -> Result<RecoveryResult> {
    if !(delta_v > 0.0 && delta_v < 1.0) {
        return Err(Error::invalid("delta_v", "must lie in (0, 1)"));
    }
    let r = choose_cutoff(d, k, delta_hint, eps_x)?;
    let m = choose_sample_count(k, eps_x, delta_s, d)?;
    let mut plan = draw_plan(d, k, r, m, 2, seed)?;
    plan.eps_x = eps_x;
    plan.delta_s = delta_s;
    plan.delta_v = delta_v;
    let opts = RecoverOptions {
        delta_hint: Some(delta_hint),
        ..RecoverOptions::default()
    };
    recover_with_plan(oracle, &plan, k, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_instance, MeasurementOracle, WeightLaw};
    use crate::rng::substream;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn normalize_divides_by_last_entry_and_pins_it() {
        let v = Array2::from_shape_vec(
            (3, 1),
            vec![
                Complex64::new(2.0, 2.0),
                Complex64::new(0.0, 4.0),
                Complex64::new(2.0, 0.0),
            ],
        )
        .unwrap();
        let n = normalize_columns(&v).unwrap();
        assert_abs_diff_eq!(n[[0, 0]].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(n[[0, 0]].im, 1.0, epsilon = 1e-15);
        assert_eq!(n[[2, 0]], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn normalize_cancels_column_scales() {
        let mut rng = substream(&[0x4e4f, 1]);
        let v = Array2::from_shape_fn((5, 2), |_| {
            Complex64::new(rng.random_range(0.5..1.5), rng.random_range(-1.0..1.0))
        });
        let mut scaled = v.clone();
        let c = Complex64::new(-0.7, 1.9);
        for i in 0..5 {
            scaled[[i, 1]] *= c;
        }
        let a = normalize_columns(&v).unwrap();
        let b = normalize_columns(&scaled).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn normalize_rejects_vanishing_last_entry() {
        let v = Array2::from_shape_vec(
            (2, 1),
            vec![Complex64::new(1.0, 0.0), Complex64::new(1e-9, 0.0)],
        )
        .unwrap();
        match normalize_columns(&v) {
            Err(Error::VanishingLastEntry { col: 0, .. }) => {}
            other => panic!("expected vanishing-entry error, got {other:?}"),
        }
    }

    #[test]
    fn read_off_recovers_coordinates_from_phases() {
        // One column, d = 2, m = 1: rows are [gaussian, e1, e2, zero].
        let mu = [0.3, -0.999];
        let mut v = Array2::from_elem((4, 1), Complex64::new(1.0, 0.0));
        v[[1, 0]] = Complex64::cis(PI * mu[0]);
        v[[2, 0]] = Complex64::cis(PI * mu[1]);
        let (loc, dev) = read_off(&v, 2).unwrap();
        assert_abs_diff_eq!(loc[[0, 0]], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(loc[[0, 1]], -0.999, epsilon = 1e-12);
        assert!(dev < 1e-12);
    }

    #[test]
    fn read_off_folds_branch_cut_to_plus_one() {
        // Both signed zeros of the imaginary part at -1 map to +1: the
        // domain identifies the endpoints.
        for im in [0.0f64, -0.0] {
            let mut v = Array2::from_elem((3, 1), Complex64::new(1.0, 0.0));
            v[[1, 0]] = Complex64::new(-1.0, im);
            let (loc, _) = read_off(&v, 1).unwrap();
            assert_eq!(loc[[0, 0]], 1.0, "im = {im:?}");
        }
    }

    #[test]
    fn read_off_reports_modulus_deviation() {
        let mut v = Array2::from_elem((3, 1), Complex64::new(1.0, 0.0));
        v[[1, 0]] = Complex64::new(0.0, 1.1);
        let (_, dev) = read_off(&v, 1).unwrap();
        assert_abs_diff_eq!(dev, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn single_source_weight_closed_form() {
        let src = SourceSet::new(
            Array2::from_shape_vec((1, 2), vec![0.3, -0.5]).unwrap(),
            vec![Complex64::new(0.55, 0.2)],
        )
        .unwrap();
        let plan = draw_plan(2, 1, 1.0, 3, 2, 9).unwrap();
        let mut oracle = MeasurementOracle::new(src.clone(), 0.0, 0);
        let mut res = recover_with_plan(&mut oracle, &plan, 1, &RecoverOptions::default()).unwrap();
        res.score_against(&src).unwrap();
        assert!(res.matched_error.unwrap() < 1e-10);
        assert!((res.weights[0] - src.weights()[0]).norm() < 1e-10);
        assert!(res.diagnostics.weight_residual < 1e-8);
    }

    #[test]
    fn matched_error_zero_on_identical_sets_any_order() {
        let a = Array2::from_shape_vec((3, 2), vec![0.1, 0.2, -0.4, 0.5, 0.9, -0.9]).unwrap();
        let mut b = Array2::zeros((3, 2));
        b.row_mut(0).assign(&a.row(2));
        b.row_mut(1).assign(&a.row(0));
        b.row_mut(2).assign(&a.row(1));
        assert_eq!(matched_error(&a, &b).unwrap(), 0.0);
        assert_eq!(sum_matched_error(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn bottleneck_beats_greedy_pairing() {
        // Greedy grabs the zero-distance pair (a1, b0) and is then forced
        // into 0.3; the optimal max is 0.2.
        let a = Array2::from_shape_vec((2, 1), vec![0.0, 0.1]).unwrap();
        let b = Array2::from_shape_vec((2, 1), vec![0.1, 0.3]).unwrap();
        assert_abs_diff_eq!(matched_error(&a, &b).unwrap(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn sum_matching_picks_cheaper_total() {
        let a = Array2::from_shape_vec((2, 1), vec![0.0, 1.0]).unwrap();
        let b = Array2::from_shape_vec((2, 1), vec![0.5, 1.1]).unwrap();
        // Identity pairing costs 0.5 + 0.1; the swap costs 1.1 + 0.5.
        assert_abs_diff_eq!(sum_matched_error(&a, &b).unwrap(), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn matched_error_known_displacement() {
        let a = Array2::from_shape_vec((2, 2), vec![0.0, 0.0, 0.5, 0.5]).unwrap();
        let mut b = a.clone();
        b[[0, 0]] += 0.03;
        b[[1, 1]] -= 0.04;
        assert_abs_diff_eq!(matched_error(&a, &b).unwrap(), 0.04, epsilon = 1e-15);
        assert_abs_diff_eq!(sum_matched_error(&a, &b).unwrap(), 0.07, epsilon = 1e-15);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = Array2::zeros((2, 1));
        let b = Array2::zeros((3, 1));
        assert!(matched_error(&a, &b).is_err());
    }

    fn exhaustive_min_sum(dist: &Array2<f64>) -> f64 {
        fn permute(rest: &mut Vec<usize>, chosen: &mut Vec<usize>, dist: &Array2<f64>, best: &mut f64) {
            if rest.is_empty() {
                let total: f64 = chosen
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| dist[[i, j]])
                    .sum();
                *best = best.min(total);
                return;
            }
            for idx in 0..rest.len() {
                let j = rest.swap_remove(idx);
                chosen.push(j);
                permute(rest, chosen, dist, best);
                chosen.pop();
                rest.push(j);
                let last = rest.len() - 1;
                rest.swap(idx, last);
            }
        }
        let k = dist.nrows();
        let mut best = f64::INFINITY;
        permute(&mut (0..k).collect(), &mut Vec::new(), dist, &mut best);
        best
    }

    fn exhaustive_bottleneck(dist: &Array2<f64>) -> f64 {
        fn permute(rest: &mut Vec<usize>, chosen: &mut Vec<usize>, dist: &Array2<f64>, best: &mut f64) {
            if rest.is_empty() {
                let worst: f64 = chosen
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| dist[[i, j]])
                    .fold(0.0, f64::max);
                *best = best.min(worst);
                return;
            }
            for idx in 0..rest.len() {
                let j = rest.swap_remove(idx);
                chosen.push(j);
                permute(rest, chosen, dist, best);
                chosen.pop();
                rest.push(j);
                let last = rest.len() - 1;
                rest.swap(idx, last);
            }
        }
        let k = dist.nrows();
        let mut best = f64::INFINITY;
        permute(&mut (0..k).collect(), &mut Vec::new(), dist, &mut best);
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn min_sum_matches_exhaustive(
            k in 1usize..=6,
            coords in prop::collection::vec(-1.0f64..1.0, 24),
        ) {
            let a = Array2::from_shape_fn((k, 2), |(i, t)| coords[2 * i + t]);
            let b = Array2::from_shape_fn((k, 2), |(i, t)| coords[12 + 2 * i + t]);
            let dist = distance_matrix(&a, &b).unwrap();
            let fast = sum_matched_error(&a, &b).unwrap();
            let slow = exhaustive_min_sum(&dist);
            prop_assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }

        #[test]
        fn bottleneck_matches_exhaustive(
            k in 1usize..=6,
            coords in prop::collection::vec(-1.0f64..1.0, 24),
        ) {
            let a = Array2::from_shape_fn((k, 2), |(i, t)| coords[2 * i + t]);
            let b = Array2::from_shape_fn((k, 2), |(i, t)| coords[12 + 2 * i + t]);
            let dist = distance_matrix(&a, &b).unwrap();
            let fast = matched_error(&a, &b).unwrap();
            let slow = exhaustive_bottleneck(&dist);
            prop_assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }

        #[test]
        fn bottleneck_triangle_inequality(
            k in 1usize..=5,
            coords in prop::collection::vec(-1.0f64..1.0, 30),
        ) {
            let pick = |base: usize| Array2::from_shape_fn((k, 2), |(i, t)| coords[base + 2 * i + t]);
            let a = pick(0);
            let b = pick(10);
            let c = pick(20);
            let ab = matched_error(&a, &b).unwrap();
            let bc = matched_error(&b, &c).unwrap();
            let ac = matched_error(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn fit_weights_rejects_coincident_columns() {
        let src = SourceSet::new(
            Array2::from_shape_vec((1, 1), vec![0.4]).unwrap(),
            vec![Complex64::new(0.8, 0.0)],
        )
        .unwrap();
        let plan = draw_plan(1, 1, 1.0, 4, 2, 3).unwrap();
        let mut oracle = MeasurementOracle::new(src.clone(), 0.0, 0);
        let built = build_tensor(&mut oracle, &plan).unwrap();
        // Duplicate the single honest column: the Gram matrix is singular.
        let col = crate::sampling::augmented_factor(&src, &plan).unwrap();
        let mut doubled = Array2::zeros((col.nrows(), 2));
        doubled.column_mut(0).assign(&col.column(0));
        doubled.column_mut(1).assign(&col.column(0));
        let locs = Array2::from_shape_vec((2, 1), vec![0.4, 0.4]).unwrap();
        match fit_weights(&built.tensor, &doubled, &locs, &plan.slice_vectors()) {
            Err(Error::IllConditionedWeights { .. }) => {}
            other => panic!("expected conditioning error, got {other:?}"),
        }
    }

    #[test]
    fn noiseless_pipeline_recovers_instance() {
        let mut rng = substream(&[0x5050, 4]);
        let src = random_instance(2, 3, 0.3, WeightLaw::UniformPhase, &mut rng).unwrap();
        let mut oracle = MeasurementOracle::new(src.clone(), 0.0, 0);
        let mut res = recover(&mut oracle, 2, 3, 0.3, 0.25, 0.1, 0.1, 11).unwrap();
        res.score_against(&src).unwrap();
        assert!(
            res.matched_error.unwrap() < 1e-8,
            "location error {}",
            res.matched_error.unwrap()
        );
        assert!(
            res.weight_error.unwrap() < 1e-7,
            "weight error {}",
            res.weight_error.unwrap()
        );
        assert!(res.diagnostics.weight_residual < 1e-6);
        assert_eq!(res.diagnostics.attempts, 1);
        for row in res.locations.rows() {
            for &x in row.iter() {
                assert!((-1.0..=1.0).contains(&x));
            }
        }
    }

    #[test]
    fn retry_keeps_best_attempt_when_floor_unreachable() {
        // An absurd separation floor forces every redraw; the result must
        // still come back (flagged) rather than erroring.
        let mut rng = substream(&[0x5051, 5]);
        let src = random_instance(2, 2, 0.4, WeightLaw::default(), &mut rng).unwrap();
        let plan = draw_plan(2, 2, 2.5, 8, 2, 12).unwrap();
        let mut oracle = MeasurementOracle::new(src.clone(), 0.0, 0);
        let opts = RecoverOptions {
            sep_tol: Some(10.0),
            ..RecoverOptions::default()
        };
        let mut res = recover_with_plan(&mut oracle, &plan, 2, &opts).unwrap();
        assert_eq!(res.diagnostics.attempts, 4);
        assert!(!res.diagnostics.warnings.is_empty());
        res.score_against(&src).unwrap();
        assert!(res.matched_error.unwrap() < 1e-8);
    }
}
