//! Kernel functions and the calculus that drives sketch-dimension selection.
//!
//! Every kernel here is shift-invariant, radial, and non-increasing, written as
//! a scalar function `κ(t)` of the bandwidth-scaled squared distance
//! `t = ‖x − m‖² / σ²`, normalized so `κ(0) = 1`. The bandwidth is applied
//! once, at distance computation, never inside the kernel formulas.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The supported kernel families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// `κ(t) = e^{−t}`
    Gaussian,
    /// `κ(t) = 4 / (e^{√t} + 2 + e^{−√t})`
    Logistic,
    /// `κ(t) = 2 / (e^{√t} + e^{−√t})`
    Sigmoid,
    /// `κ(t) = 1 / (1 + t)`
    Cauchy,
    /// `κ(t) = e^{−t^α}` for exponent `α > 0`
    GeneralizedGaussian { alpha: f64 },
    /// `κ(t) = 1` for `t ≤ 1`, `0` otherwise
    Box,
    /// `κ(t) = max(0, 1 − t)`
    Epanechnikov,
}

/// A kernel together with its bandwidth `σ`.
///
/// Evaluation always happens at `t = ‖x − m‖² / σ²`; the methods on this type
/// take that scaled `t` directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    kind: KernelKind,
    bandwidth: f64,
}

/// Relative-distance-smoothness constants: bounds
/// `c1·t^d1 − q1 ≤ −κ′(t)·t/κ(t) ≤ c2·t^d2` for all `t ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdsParams {
    pub c1: f64,
    pub d1: f64,
    pub q1: f64,
    pub c2: f64,
    pub d2: f64,
}

impl RdsParams {
    pub fn new(c1: f64, d1: f64, q1: f64, c2: f64, d2: f64) -> Result<Self> {
        for (name, v) in [("c1", c1), ("d1", d1), ("c2", c2), ("d2", d2)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("rds parameter {name} must be positive")));
            }
        }
        if !(q1 >= 0.0) || !q1.is_finite() {
            return Err(Error::Domain("rds parameter q1 must be non-negative".into()));
        }
        Ok(Self { c1, d1, q1, c2, d2 })
    }
}

/// A lower bound on `min_{0 ≤ t ≤ 2ξ} κ′(t)·t/κ(t)`, with a flag telling
/// whether the bound is analytically certified or came from grid sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioBound {
    pub value: f64,
    pub certified: bool,
}

const BISECTION_REL_TOL: f64 = 1e-12;
const BISECTION_MAX_ITERS: u32 = 200;
const RATIO_GRID_POINTS: usize = 10_001;
const RATIO_GRID_SAFETY: f64 = 1.01;

impl KernelSpec {
    pub fn new(kind: KernelKind, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::Domain(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if let KernelKind::GeneralizedGaussian { alpha } = kind {
            if !(alpha > 0.0) || !alpha.is_finite() {
                return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
            }
        }
        Ok(Self { kind, bandwidth })
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelKind::Gaussian, bandwidth)
    }

    pub fn generalized_gaussian(alpha: f64, bandwidth: f64) -> Result<Self> {
        Self::new(KernelKind::GeneralizedGaussian { alpha }, bandwidth)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Whether `κ(t)` is convex in `t`. Required by the single-step recovery
    /// route and the mean-shift monotonicity guarantee.
    pub fn convex(&self) -> bool {
        match self.kind {
            KernelKind::Gaussian
            | KernelKind::Logistic
            | KernelKind::Sigmoid
            | KernelKind::Cauchy
            | KernelKind::Epanechnikov => true,
            KernelKind::GeneralizedGaussian { alpha } => alpha <= 1.0,
            KernelKind::Box => false,
        }
    }

    /// Whether `κ′` exists (everywhere but at most a single kink).
    pub fn differentiable(&self) -> bool {
        !matches!(self.kind, KernelKind::Box)
    }

    /// Evaluates `κ(t)` for bandwidth-scaled squared distance `t ≥ 0`.
    pub fn kappa(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("kappa requires t >= 0, got {t}")));
        }
        Ok(self.kappa_raw(t))
    }

    /// `κ(t)` without the domain check; callers guarantee `t ≥ 0`.
    pub(crate) fn kappa_raw(&self, t: f64) -> f64 {
        match self.kind {
            KernelKind::Gaussian => (-t).exp(),
            KernelKind::Logistic => {
                let s = t.sqrt();
                4.0 / (s.exp() + 2.0 + (-s).exp())
            }
            KernelKind::Sigmoid => {
                let s = t.sqrt();
                2.0 / (s.exp() + (-s).exp())
            }
            KernelKind::Cauchy => 1.0 / (1.0 + t),
            KernelKind::GeneralizedGaussian { alpha } => (-t.powf(alpha)).exp(),
            KernelKind::Box => {
                if t <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelKind::Epanechnikov => (1.0 - t).max(0.0),
        }
    }

    /// Evaluates the derivative `κ′(t)`.
    ///
    /// The Epanechnikov kink takes its right limit, `κ′(1) = 0`, keeping the
    /// kernel's influence zero at its support boundary. For the generalized
    /// Gaussian with `α < 1` the closed form diverges at `t = 0` and the
    /// returned value is `−∞`.
    pub fn kappa_prime(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("kappa_prime requires t >= 0, got {t}")));
        }
        match self.kind {
            KernelKind::Gaussian => Ok(-(-t).exp()),
            KernelKind::Logistic => {
                // κ(t) = sech²(√t/2), so κ′(t) = −sech²(√t/2)·tanh(√t/2) / (2√t).
                if t == 0.0 {
                    return Ok(-0.25);
                }
                let s = t.sqrt();
                let half = s / 2.0;
                let sech = 1.0 / half.cosh();
                Ok(-(sech * sech) * half.tanh() / (2.0 * s))
            }
            KernelKind::Sigmoid => {
                // κ(t) = sech(√t), so κ′(t) = −sech(√t)·tanh(√t) / (2√t).
                if t == 0.0 {
                    return Ok(-0.5);
                }
                let s = t.sqrt();
                Ok(-(1.0 / s.cosh()) * s.tanh() / (2.0 * s))
            }
            KernelKind::Cauchy => {
                let u = 1.0 + t;
                Ok(-1.0 / (u * u))
            }
            KernelKind::GeneralizedGaussian { alpha } => {
                Ok(-alpha * t.powf(alpha - 1.0) * (-t.powf(alpha)).exp())
            }
            KernelKind::Box => Err(Error::Unsupported(
                "box kernel has no derivative".into(),
            )),
            KernelKind::Epanechnikov => Ok(if t < 1.0 { -1.0 } else { 0.0 }),
        }
    }

    /// The relative decay rate `−κ′(t)·t/κ(t)`, taking its limit value `0`
    /// at `t = 0`. This is the quantity bounded by the RDS constants.
    pub fn rds_ratio(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("rds_ratio requires t >= 0, got {t}")));
        }
        if !self.differentiable() {
            return Err(Error::Unsupported("box kernel has no derivative".into()));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok(match self.kind {
            KernelKind::Gaussian => t,
            KernelKind::Logistic => t.sqrt() * (t.sqrt() / 2.0).tanh() / 2.0,
            KernelKind::Sigmoid => t.sqrt() * t.sqrt().tanh() / 2.0,
            KernelKind::Cauchy => t / (1.0 + t),
            KernelKind::GeneralizedGaussian { alpha } => alpha * t.powf(alpha),
            KernelKind::Epanechnikov => {
                if t < 1.0 {
                    t / (1.0 - t)
                } else {
                    // κ vanishes on [1, ∞); the ratio is undefined there.
                    f64::INFINITY
                }
            }
            KernelKind::Box => unreachable!(),
        })
    }

    /// The critical radius `ξ_κ(level)`: the smallest `t` with `κ(t) ≤ level`.
    pub fn critical_radius(&self, level: f64) -> Result<f64> {
        if !(level > 0.0 && level <= 1.0) {
            return Err(Error::Domain(format!(
                "critical radius level must be in (0, 1], got {level}"
            )));
        }
        if level == 1.0 {
            return Ok(0.0);
        }
        Ok(match self.kind {
            KernelKind::Gaussian => (1.0 / level).ln(),
            KernelKind::Cauchy => 1.0 / level - 1.0,
            KernelKind::GeneralizedGaussian { alpha } => (1.0 / level).ln().powf(1.0 / alpha),
            KernelKind::Box => 1.0,
            KernelKind::Epanechnikov => 1.0 - level,
            KernelKind::Logistic | KernelKind::Sigmoid => self.bisect_radius(level),
        })
    }

    // Monotone bisection for the kinds without a convenient inverse. κ is
    // strictly decreasing and continuous, so this is unconditionally safe.
    fn bisect_radius(&self, level: f64) -> f64 {
        let mut hi = 1.0;
        while self.kappa_raw(hi) > level {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..BISECTION_MAX_ITERS {
            let mid = 0.5 * (lo + hi);
            if self.kappa_raw(mid) <= level {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= BISECTION_REL_TOL * hi.max(1.0) {
                break;
            }
        }
        hi
    }

    /// A certified lower bound on `min_{0 ≤ t ≤ 2ξ} κ′(t)·t/κ(t)`.
    ///
    /// The Cauchy kernel admits the global bound `−1`. Kernels with built-in
    /// RDS constants use `−c2·(2ξ)^{d2}`. Anything else falls back to grid
    /// minimization over 10,001 points with a ×1.01 safety margin, flagged
    /// non-certified.
    pub fn kappa_prime_min(&self, xi: f64) -> Result<RatioBound> {
        if !(xi >= 0.0) {
            return Err(Error::Domain(format!("kappa_prime_min requires xi >= 0, got {xi}")));
        }
        if !self.differentiable() {
            return Err(Error::Unsupported(
                "kappa_prime_min needs a differentiable kernel".into(),
            ));
        }
        if matches!(self.kind, KernelKind::Cauchy) {
            return Ok(RatioBound { value: -1.0, certified: true });
        }
        if let Some(p) = self.rds_params() {
            return Ok(RatioBound {
                value: -p.c2 * (2.0 * xi).powf(p.d2),
                certified: true,
            });
        }
        // Grid fallback; points where κ vanishes are skipped because the
        // ratio is undefined there.
        let hi = 2.0 * xi;
        let mut min = 0.0f64;
        for i in 0..RATIO_GRID_POINTS {
            let t = hi * i as f64 / (RATIO_GRID_POINTS - 1) as f64;
            if self.kappa_raw(t) <= 0.0 {
                continue;
            }
            let v = -self.rds_ratio(t)?;
            if v < min {
                min = v;
            }
        }
        Ok(RatioBound { value: min * RATIO_GRID_SAFETY, certified: false })
    }

    /// The projection error parameter `γ = −ε / (2 κ′_min)` with
    /// `κ′_min` taken over the window `[0, 2 ξ_κ(ε/2n)]`.
    pub fn gamma_for_epsilon(&self, n: usize, eps: f64) -> Result<f64> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Domain(format!("eps must be in (0, 1], got {eps}")));
        }
        if n == 0 {
            return Err(Error::Domain("n must be positive".into()));
        }
        let xi = self.critical_radius((eps / (2.0 * n as f64)).min(1.0))?;
        let bound = self.kappa_prime_min(xi)?;
        if bound.value == 0.0 {
            return Err(Error::Degenerate(
                "kernel is locally constant on the critical window".into(),
            ));
        }
        let gamma = -eps / (2.0 * bound.value);
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Degenerate(format!(
                "kernel decay gives unusable gamma {gamma}"
            )));
        }
        Ok(gamma)
    }

    /// Built-in RDS constants, where known.
    pub fn rds_params(&self) -> Option<RdsParams> {
        match self.kind {
            KernelKind::Gaussian => Some(RdsParams { c1: 1.0, d1: 1.0, q1: 0.0, c2: 1.0, d2: 1.0 }),
            KernelKind::Logistic | KernelKind::Sigmoid => {
                Some(RdsParams { c1: 0.5, d1: 0.5, q1: 0.5, c2: 0.5, d2: 0.5 })
            }
            KernelKind::GeneralizedGaussian { alpha } => {
                Some(RdsParams { c1: alpha, d1: alpha, q1: 0.0, c2: alpha, d2: alpha })
            }
            _ => None,
        }
    }

    /// Checks both RDS inequalities at every grid point, within absolute
    /// slack `1e−9`.
    pub fn rds_check(&self, params: &RdsParams, t_grid: &[f64]) -> Result<bool> {
        const SLACK: f64 = 1e-9;
        if !self.differentiable() {
            return Err(Error::Unsupported("rds_check needs a differentiable kernel".into()));
        }
        for &t in t_grid {
            let r = self.rds_ratio(t)?;
            let lower = params.c1 * t.powf(params.d1) - params.q1;
            let upper = params.c2 * t.powf(params.d2);
            if lower > r + SLACK || r > upper + SLACK {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            KernelKind::Gaussian => write!(f, "gaussian@{}", self.bandwidth),
            KernelKind::Logistic => write!(f, "logistic@{}", self.bandwidth),
            KernelKind::Sigmoid => write!(f, "sigmoid@{}", self.bandwidth),
            KernelKind::Cauchy => write!(f, "cauchy@{}", self.bandwidth),
            KernelKind::GeneralizedGaussian { alpha } => {
                write!(f, "gengauss:{}@{}", alpha, self.bandwidth)
            }
            KernelKind::Box => write!(f, "box@{}", self.bandwidth),
            KernelKind::Epanechnikov => write!(f, "epanechnikov@{}", self.bandwidth),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// Parses the CLI kernel format `kind[:alpha]@bandwidth`, e.g.
    /// `gaussian@70` or `gengauss:0.5@20`. Case-insensitive.
    fn from_str(s: &str) -> Result<Self> {
        let (head, bw) = s
            .split_once('@')
            .ok_or_else(|| Error::Parse(format!("kernel spec `{s}` is missing `@bandwidth`")))?;
        let bandwidth: f64 = bw
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad bandwidth `{bw}` in kernel spec `{s}`")))?;
        let (name, alpha) = match head.split_once(':') {
            Some((n, a)) => {
                let alpha: f64 = a
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad alpha `{a}` in kernel spec `{s}`")))?;
                (n, Some(alpha))
            }
            None => (head, None),
        };
        let name = name.trim().to_ascii_lowercase();
        let kind = match name.as_str() {
            "gaussian" => KernelKind::Gaussian,
            "logistic" => KernelKind::Logistic,
            "sigmoid" => KernelKind::Sigmoid,
            "cauchy" => KernelKind::Cauchy,
            "gengauss" | "gengaussian" | "generalizedgaussian" => {
                let alpha = alpha.ok_or_else(|| {
                    Error::Parse(format!("kernel `{name}` needs an alpha, e.g. gengauss:0.5@1"))
                })?;
                return KernelSpec::new(KernelKind::GeneralizedGaussian { alpha }, bandwidth);
            }
            "box" => KernelKind::Box,
            "epanechnikov" | "epan" => KernelKind::Epanechnikov,
            other => return Err(Error::Parse(format!("unknown kernel kind `{other}`"))),
        };
        if alpha.is_some() {
            return Err(Error::Parse(format!("kernel `{name}` does not take an alpha")));
        }
        KernelSpec::new(kind, bandwidth)
    }
}
