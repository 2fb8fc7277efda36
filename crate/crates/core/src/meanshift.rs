//! Mean-shift iteration with restart strategies.
//!
//! Each step replaces the current point with the κ′-weighted centroid of the
//! centers. For convex non-increasing kernels the KDE value is monotonically
//! non-decreasing along the trajectory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kde::KdeInstance;
use crate::kernels::{KernelKind, KernelSpec};
use crate::util::{child_seed, dist_sq};

/// How a candidate mode was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    MeanShift,
    BruteForce,
    RecoveredConvex,
    RecoveredNonConvex,
}

/// A candidate mode with its KDE value and solve metadata.
///
/// `value` is always recomputed from the instance at construction; stale or
/// sketched values never leak into results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub method: Method,
    pub iterations: usize,
    pub seed: u64,
    pub trajectory_values: Option<Vec<f64>>,
    /// Set when the iteration stopped because every weight vanished.
    pub stalled: bool,
}

impl ModeResult {
    pub fn evaluated(
        inst: &KdeInstance,
        point: Vec<f64>,
        method: Method,
        iterations: usize,
        seed: u64,
    ) -> Result<Self> {
        let value = inst.evaluate(&point)?;
        Ok(Self { point, value, method, iterations, seed, trajectory_values: None, stalled: false })
    }
}

const SEED_TAG_RESTART: u64 = 0x5253; // "RS"

/// Default iteration and restart counts for the full-dimensional baseline.
pub const BASELINE_ITERS: usize = 100;
pub const BASELINE_RESTARTS: usize = 60;
/// Defaults for solving the sketched instance.
pub const SKETCHED_ITERS: usize = 10;
pub const SKETCHED_RESTARTS: usize = 30;
/// Default relative convergence tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Normalized non-negative weights `−κ′(t_i) / Σ_j −κ′(t_j)`.
///
/// Both numerator and denominator of the textbook ratio are non-positive, so
/// the negated form keeps the arithmetic sign-safe. When every weight
/// underflows, exponential-family kernels are re-evaluated with the smallest
/// exponent shifted out, which leaves the normalized weights unchanged.
pub(crate) fn derivative_weights(kernel: &KernelSpec, ts: &[f64]) -> Result<Vec<f64>> {
    let mut weights: Vec<f64> = Vec::with_capacity(ts.len());
    for &t in ts {
        weights.push(-kernel.kappa_prime(t)?);
    }

    // A diverging derivative only happens at t = 0 (generalized Gaussian
    // with α < 1); in the limit those centers take all the weight.
    if weights.iter().any(|w| w.is_infinite()) {
        let hits = weights.iter().filter(|w| w.is_infinite()).count() as f64;
        for w in &mut weights {
            *w = if w.is_infinite() { 1.0 / hits } else { 0.0 };
        }
        return Ok(weights);
    }

    let max = weights.iter().cloned().fold(0.0f64, f64::max);
    if max < 1e-300 {
        match kernel.kind() {
            KernelKind::Gaussian => {
                let t_min = ts.iter().cloned().fold(f64::INFINITY, f64::min);
                for (w, &t) in weights.iter_mut().zip(ts) {
                    *w = (-(t - t_min)).exp();
                }
            }
            KernelKind::GeneralizedGaussian { alpha } => {
                let p_min =
                    ts.iter().map(|t| t.powf(alpha)).fold(f64::INFINITY, f64::min);
                for (w, &t) in weights.iter_mut().zip(ts) {
                    *w = alpha * t.powf(alpha - 1.0) * (-(t.powf(alpha) - p_min)).exp();
                }
            }
            _ => return Err(Error::Stall),
        }
    }
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::Stall);
    }
    for w in &mut weights {
        *w /= sum;
    }
    Ok(weights)
}

/// One mean-shift update: the κ′-weighted centroid of the centers. The
/// result lies in the convex hull of the dataset.
pub fn mean_shift_step(inst: &KdeInstance, x: &[f64]) -> Result<Vec<f64>> {
    let data = inst.data();
    let kernel = inst.kernel();
    if !kernel.differentiable() {
        return Err(Error::Unsupported("mean-shift needs a differentiable kernel".into()));
    }
    if x.len() != data.dim() {
        return Err(Error::Domain(format!(
            "query has dimension {} but dataset has {}",
            x.len(),
            data.dim()
        )));
    }
    let inv_bw_sq = 1.0 / (kernel.bandwidth() * kernel.bandwidth());
    let ts: Vec<f64> = data.iter_points().map(|m| dist_sq(x, m) * inv_bw_sq).collect();
    let weights = derivative_weights(kernel, &ts)?;
    let mut out = vec![0.0; data.dim()];
    for (m, w) in data.iter_points().zip(&weights) {
        for (o, v) in out.iter_mut().zip(m) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Runs mean-shift from `x0` until the step length drops below
/// `tol·(1 + ‖x‖)` or `max_iters` is reached. A stalled step returns the
/// current iterate with the stall flag set rather than an error.
pub fn mean_shift(
    inst: &KdeInstance,
    x0: &[f64],
    max_iters: usize,
    tol: f64,
    record_trajectory: bool,
) -> Result<ModeResult> {
    mean_shift_seeded(inst, x0, max_iters, tol, record_trajectory, 0)
}

fn mean_shift_seeded(
    inst: &KdeInstance,
    x0: &[f64],
    max_iters: usize,
    tol: f64,
    record_trajectory: bool,
    seed: u64,
) -> Result<ModeResult> {
    let mut x = x0.to_vec();
    let mut trajectory = if record_trajectory {
        Some(vec![inst.evaluate(&x)?])
    } else {
        None
    };
    let mut iterations = 0;
    let mut stalled = false;
    for _ in 0..max_iters {
        let next = match mean_shift_step(inst, &x) {
            Ok(next) => next,
            Err(Error::Stall) => {
                stalled = true;
                break;
            }
            Err(e) => return Err(e),
        };
        iterations += 1;
        let step = dist_sq(&next, &x).sqrt();
        let scale = 1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = next;
        if let Some(t) = trajectory.as_mut() {
            t.push(inst.evaluate(&x)?);
        }
        if step <= tol * scale {
            break;
        }
    }
    let value = inst.evaluate(&x)?;
    Ok(ModeResult {
        point: x,
        value,
        method: Method::MeanShift,
        iterations,
        seed,
        trajectory_values: trajectory,
        stalled,
    })
}

/// Generates the restart point for index `r`: even indices draw a random
/// convex combination of all points (Dirichlet-uniform weights via
/// normalized exponentials), odd indices a random convex combination of a
/// uniformly chosen pair.
fn restart_point(inst: &KdeInstance, seed: u64, r: usize) -> Vec<f64> {
    let data = inst.data();
    let n = data.len();
    let d = data.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, SEED_TAG_RESTART, r as u64, 0));
    let mut out = vec![0.0; d];
    if r % 2 == 0 {
        let mut weights: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
        for (m, w) in data.iter_points().zip(&weights) {
            for (o, v) in out.iter_mut().zip(m) {
                *o += w * v;
            }
        }
    } else {
        let i = rng.random_range(0..n);
        let j = if n == 1 {
            0
        } else {
            let j = rng.random_range(0..n - 1);
            if j >= i {
                j + 1
            } else {
                j
            }
        };
        let lambda: f64 = rng.random_range(0.0..1.0);
        for (o, (a, b)) in out.iter_mut().zip(data.point(i).iter().zip(data.point(j))) {
            *o = lambda * a + (1.0 - lambda) * b;
        }
    }
    out
}

/// Mean-shift from `restarts` seeded starting points, returning the result
/// with the highest KDE value (earliest restart wins ties). Restarts run in
/// parallel; each derives its own RNG stream from `(seed, index)`, so the
/// outcome is identical regardless of thread count.
pub fn multi_restart(
    inst: &KdeInstance,
    restarts: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
    record_trajectory: bool,
) -> Result<ModeResult> {
    if restarts == 0 {
        return Err(Error::Domain("restarts must be at least 1".into()));
    }
    let runs: Vec<Result<ModeResult>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let x0 = restart_point(inst, seed, r);
            mean_shift_seeded(inst, &x0, max_iters, tol, record_trajectory, seed)
        })
        .collect();
    let mut best: Option<ModeResult> = None;
    for run in runs {
        let run = run?;
        let better = match &best {
            None => true,
            Some(b) => run.value > b.value,
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kde::Dataset;
    use approx::assert_relative_eq;

    fn gaussian_inst(rows: Vec<Vec<f64>>) -> KdeInstance {
        KdeInstance::new(
            Dataset::from_rows(rows).unwrap(),
            KernelSpec::new(KernelKind::Gaussian, 1.0).unwrap(),
        )
    }

    #[test]
    fn step_singleton_returns_center() {
        let inst = gaussian_inst(vec![vec![3.0, -1.0]]);
        let next = mean_shift_step(&inst, &[100.0, 100.0]).unwrap();
        assert_eq!(next, vec![3.0, -1.0]);
    }

    #[test]
    fn step_symmetric_pair_stays_centered() {
        let inst = gaussian_inst(vec![vec![-1.0], vec![1.0]]);
        let next = mean_shift_step(&inst, &[0.0]).unwrap();
        assert_eq!(next[0], 0.0);
    }

    #[test]
    fn step_matches_hand_computed_update() {
        // M = {0, 2}, Gaussian, x = 0: weights e^0 and e^{−4}, so the update
        // is 2e^{−4}/(1 + e^{−4}).
        let inst = gaussian_inst(vec![vec![0.0], vec![2.0]]);
        let next = mean_shift_step(&inst, &[0.0]).unwrap();
        let expect = 2.0 * (-4.0f64).exp() / (1.0 + (-4.0f64).exp());
        assert_relative_eq!(next[0], expect, max_relative = 1e-14);
        assert_relative_eq!(next[0], 0.035972, max_relative = 1e-4);
    }

    #[test]
    fn step_stalls_when_no_center_in_range() {
        let inst = KdeInstance::new(
            Dataset::from_rows(vec![vec![10.0], vec![12.0]]).unwrap(),
            KernelSpec::new(KernelKind::Epanechnikov, 1.0).unwrap(),
        );
        assert!(matches!(mean_shift_step(&inst, &[0.0]), Err(Error::Stall)));
    }

    #[test]
    fn step_is_fixed_point_at_singleton_mode() {
        let inst = gaussian_inst(vec![vec![0.5, 0.25, -2.0]]);
        let next = mean_shift_step(&inst, &[0.5, 0.25, -2.0]).unwrap();
        for (a, b) in next.iter().zip(&[0.5, 0.25, -2.0]) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn converges_to_symmetric_mode_with_monotone_values() {
        // For σ = 1 the pair {−1, 1} has its global mode at 0; confirmed by
        // a dense 1-d scan.
        let inst = gaussian_inst(vec![vec![-1.0], vec![1.0]]);
        let mut scan_best = (f64::MIN, 0.0);
        let mut x = -1.5;
        while x <= 1.5 {
            let v = inst.evaluate(&[x]).unwrap();
            if v > scan_best.0 {
                scan_best = (v, x);
            }
            x += 1e-4;
        }
        assert!(scan_best.1.abs() < 1e-3, "scan found mode at {}", scan_best.1);

        let res = mean_shift(&inst, &[0.3], 100, 1e-12, true).unwrap();
        assert!(res.point[0].abs() < 1e-6, "converged to {}", res.point[0]);
        let traj = res.trajectory_values.as_ref().unwrap();
        for pair in traj.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12 * pair[0].abs().max(1.0));
        }
        assert!(!res.stalled);
    }

    #[test]
    fn singleton_converges_in_one_step() {
        let inst = gaussian_inst(vec![vec![4.0]]);
        let res = mean_shift(&inst, &[4.0], 50, 1e-9, false).unwrap();
        assert_eq!(res.iterations, 1);
        assert_eq!(res.point, vec![4.0]);
        assert_eq!(res.value, 1.0);
    }

    #[test]
    fn stalled_run_reports_flag_and_start_point() {
        let inst = KdeInstance::new(
            Dataset::from_rows(vec![vec![10.0]]).unwrap(),
            KernelSpec::new(KernelKind::Epanechnikov, 1.0).unwrap(),
        );
        let res = mean_shift(&inst, &[0.0], 50, 1e-9, false).unwrap();
        assert!(res.stalled);
        assert_eq!(res.point, vec![0.0]);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn multi_restart_singleton_and_determinism() {
        let inst = gaussian_inst(vec![vec![1.0, 2.0]]);
        let res = multi_restart(&inst, 1, 50, 1e-9, 7, false).unwrap();
        assert_eq!(res.point, vec![1.0, 2.0]);

        let a = multi_restart(&inst, 8, 50, 1e-9, 42, false).unwrap();
        let b = multi_restart(&inst, 8, 50, 1e-9, 42, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn multi_restart_finds_global_mode_of_cluster_mixture() {
        // Three well-separated clusters with different sizes; the biggest
        // wins. A dense grid over the bounding box is the oracle.
        let mut rows = Vec::new();
        for (cx, cy, count) in [(0.0, 0.0, 8), (6.0, 0.0, 5), (0.0, 6.0, 3)] {
            for i in 0..count {
                let angle = i as f64 * 2.399963;
                rows.push(vec![cx + 0.3 * angle.cos(), cy + 0.3 * angle.sin()]);
            }
        }
        let inst = gaussian_inst(rows.clone());
        let res = multi_restart(&inst, 30, 100, 1e-10, 5, false).unwrap();

        let mut grid_best = f64::MIN;
        let (mut x, mut y);
        x = -1.0;
        while x <= 7.0 {
            y = -1.0;
            while y <= 7.0 {
                grid_best = grid_best.max(inst.evaluate(&[x, y]).unwrap());
                y += 0.01;
            }
            x += 0.01;
        }
        assert!(
            res.value >= grid_best - 1e-6,
            "restart value {} below grid oracle {grid_best}",
            res.value
        );
        // The winner sits in the largest cluster.
        assert!(res.point[0].abs() < 1.0 && res.point[1].abs() < 1.0);
    }

    #[test]
    fn iterates_stay_in_coordinate_hull() {
        let rows =
            vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![0.2, 2.0], vec![-1.0, 1.0]];
        let inst = gaussian_inst(rows.clone());
        let mut x = vec![0.4, 0.4];
        for _ in 0..30 {
            x = mean_shift_step(&inst, &x).unwrap();
            for j in 0..2 {
                let lo = rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
                let hi = rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
                assert!(x[j] >= lo - 1e-12 && x[j] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn coincident_center_takes_all_weight_for_steep_kernels() {
        // α < 1 makes κ′ diverge at distance zero; the step must settle on
        // the coincident center instead of producing NaNs.
        let inst = KdeInstance::new(
            Dataset::from_rows(vec![vec![0.0], vec![5.0]]).unwrap(),
            KernelSpec::generalized_gaussian(0.5, 1.0).unwrap(),
        );
        let next = mean_shift_step(&inst, &[0.0]).unwrap();
        assert_eq!(next, vec![0.0]);
    }

    #[test]
    fn far_start_survives_weight_underflow() {
        // e^{−t} underflows past t ≈ 745; the log-domain shift keeps the
        // update finite and pointing at the data.
        let inst = gaussian_inst(vec![vec![0.0], vec![1.0]]);
        let next = mean_shift_step(&inst, &[60.0]).unwrap();
        assert!(next[0].is_finite());
        assert!(next[0] >= 0.0 && next[0] <= 1.0 + 1e-12);
    }
}
