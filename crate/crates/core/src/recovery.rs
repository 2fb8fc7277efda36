//! Mapping a low-dimensional approximate mode back to the original space.
//!
//! Convex kernels get the fast route: a single κ′-weighted centroid whose
//! weights come from sketched distances but whose combination uses the
//! original points. Non-convex kernels get a constructive Lipschitz
//! one-point extension: a point satisfying `‖x′ − m‖² ≤ (1+ε)·‖x̃ − Πm‖²`
//! for every center, found by cyclic projection onto the ball constraints.

use crate::error::{Error, Result};
use crate::kde::{evaluate_raw, Dataset};
use crate::kernels::KernelSpec;
use crate::meanshift::{derivative_weights, Method, ModeResult};
use crate::sketch::SketchPair;
use crate::util::dist_sq;

/// Default number of projection sweeps before declaring failure.
pub const DEFAULT_PROJECTION_SWEEPS: usize = 10_000;

fn check_fingerprint(data: &Dataset, sk: &SketchPair) -> Result<()> {
    if sk.source_fingerprint != data.fingerprint() {
        return Err(Error::InconsistentSketch);
    }
    if sk.projected.len() != data.len() {
        return Err(Error::InconsistentSketch);
    }
    Ok(())
}

fn check_xtilde(sk: &SketchPair, x_tilde: &[f64]) -> Result<()> {
    if x_tilde.len() != sk.projected.dim() {
        return Err(Error::Domain(format!(
            "x_tilde has dimension {} but the sketch has {}",
            x_tilde.len(),
            sk.projected.dim()
        )));
    }
    Ok(())
}

/// Sketched squared distances, in kernel units, from `x̃` to every projected
/// center.
fn sketched_ts(sk: &SketchPair, x_tilde: &[f64], kernel: &KernelSpec) -> Vec<f64> {
    let inv_bw_sq = 1.0 / (kernel.bandwidth() * kernel.bandwidth());
    sk.projected.iter_points().map(|pm| dist_sq(x_tilde, pm) * inv_bw_sq).collect()
}

/// Single-step recovery for convex kernels:
/// `x′ = Σ_m m · κ′(‖x̃ − Πm‖²/σ²) / Σ_m κ′(‖x̃ − Πm‖²/σ²)`.
///
/// The reported value is always the full-dimensional KDE at `x′`. Runs in
/// `O(nw + nd)`.
pub fn recover_convex(
    data: &Dataset,
    sk: &SketchPair,
    x_tilde: &[f64],
    kernel: &KernelSpec,
) -> Result<ModeResult> {
    if !kernel.differentiable() || !kernel.convex() {
        return Err(Error::Unsupported(
            "single-step recovery needs a convex differentiable kernel".into(),
        ));
    }
    check_fingerprint(data, sk)?;
    check_xtilde(sk, x_tilde)?;

    let ts = sketched_ts(sk, x_tilde, kernel);
    let weights = derivative_weights(kernel, &ts)?;
    let mut point = vec![0.0; data.dim()];
    for (m, w) in data.iter_points().zip(&weights) {
        for (o, v) in point.iter_mut().zip(m) {
            *o += w * v;
        }
    }
    let value = evaluate_raw(data, kernel, &point);
    Ok(ModeResult {
        point,
        value,
        method: Method::RecoveredConvex,
        iterations: 1,
        seed: sk.pi.seed(),
        trajectory_values: None,
        stalled: false,
    })
}

/// Recovery for arbitrary non-increasing kernels via an explicit Lipschitz
/// one-point extension.
///
/// Returns `x′` satisfying `‖x′ − m‖² ≤ (1+eps)·‖x̃ − Πm‖²` for every
/// center, checked exactly before returning. Feasibility holds whenever the
/// sketch does not shrink center distances; the `eps` slack then makes the
/// feasible region full-dimensional, so the cyclic projection terminates.
pub fn recover_nonconvex(
    data: &Dataset,
    sk: &SketchPair,
    x_tilde: &[f64],
    kernel: &KernelSpec,
    eps: f64,
    max_sweeps: usize,
) -> Result<ModeResult> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    check_fingerprint(data, sk)?;
    check_xtilde(sk, x_tilde)?;

    let n = data.len();
    // Raw sketched squared distances; the ball constraints are geometric and
    // bandwidth plays no role in them.
    let sketched_sq: Vec<f64> =
        sk.projected.iter_points().map(|pm| dist_sq(x_tilde, pm)).collect();
    let check_radius_sq: Vec<f64> = sketched_sq.iter().map(|d2| (1.0 + eps) * d2).collect();

    let finish = |point: Vec<f64>, sweeps: usize| -> ModeResult {
        let value = evaluate_raw(data, kernel, &point);
        ModeResult {
            point,
            value,
            method: Method::RecoveredNonConvex,
            iterations: sweeps,
            seed: sk.pi.seed(),
            trajectory_values: None,
            stalled: false,
        }
    };

    // A zero-radius constraint pins x′ to that center exactly.
    if let Some(hit) = sketched_sq.iter().position(|&d2| d2 == 0.0) {
        let candidate = data.point(hit).to_vec();
        let feasible = (0..n)
            .all(|i| dist_sq(&candidate, data.point(i)) <= check_radius_sq[i]);
        if feasible {
            return Ok(finish(candidate, 0));
        }
        return Err(Error::ExtensionFailure {
            sweeps: 0,
            worst_ratio: worst_ratio(&candidate, data, &check_radius_sq),
        });
    }

    // Start from the convex-route centroid when the kernel admits one,
    // otherwise from the plain centroid.
    let mut x = match recover_convex_point(data, sk, x_tilde, kernel) {
        Some(p) => p,
        None => {
            let mut c = vec![0.0; data.dim()];
            for m in data.iter_points() {
                for (o, v) in c.iter_mut().zip(m) {
                    *o += v / n as f64;
                }
            }
            c
        }
    };

    // Project onto balls with half the slack so the limit point sits
    // strictly inside the checked constraints and the loop exits finitely.
    let target_radius_sq: Vec<f64> =
        sketched_sq.iter().map(|d2| (1.0 + eps / 2.0) * d2).collect();
    for sweep in 1..=max_sweeps {
        for i in 0..n {
            let m = data.point(i);
            let cur = dist_sq(&x, m);
            if cur > target_radius_sq[i] {
                let shrink = (target_radius_sq[i] / cur).sqrt();
                for (xj, mj) in x.iter_mut().zip(m) {
                    *xj = mj + (*xj - mj) * shrink;
                }
            }
        }
        let satisfied = (0..n).all(|i| dist_sq(&x, data.point(i)) <= check_radius_sq[i]);
        if satisfied {
            return Ok(finish(x, sweep));
        }
    }
    Err(Error::ExtensionFailure {
        sweeps: max_sweeps,
        worst_ratio: worst_ratio(&x, data, &check_radius_sq),
    })
}

fn recover_convex_point(
    data: &Dataset,
    sk: &SketchPair,
    x_tilde: &[f64],
    kernel: &KernelSpec,
) -> Option<Vec<f64>> {
    if !kernel.differentiable() {
        return None;
    }
    let ts = sketched_ts(sk, x_tilde, kernel);
    let weights = derivative_weights(kernel, &ts).ok()?;
    let mut point = vec![0.0; data.dim()];
    for (m, w) in data.iter_points().zip(&weights) {
        for (o, v) in point.iter_mut().zip(m) {
            *o += w * v;
        }
    }
    Some(point)
}

fn worst_ratio(x: &[f64], data: &Dataset, radius_sq: &[f64]) -> f64 {
    (0..data.len())
        .map(|i| {
            let r2 = radius_sq[i];
            if r2 == 0.0 {
                if dist_sq(x, data.point(i)) == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                dist_sq(x, data.point(i)) / r2
            }
        })
        .fold(0.0, f64::max)
}
