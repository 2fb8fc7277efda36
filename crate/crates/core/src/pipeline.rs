//! End-to-end experiment driver: sketch, solve the low-dimensional
//! instance, recover, and report per-dimension statistics against a
//! full-dimensional mean-shift baseline.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::{brute_force_mode_with_budget, DEFAULT_GRID_BUDGET};
use crate::error::{Error, Result};
use crate::kde::{Dataset, KdeInstance};
use crate::kernels::KernelSpec;
use crate::meanshift::{
    multi_restart, ModeResult, BASELINE_ITERS, BASELINE_RESTARTS, DEFAULT_TOL, SKETCHED_ITERS,
    SKETCHED_RESTARTS,
};
use crate::recovery::{recover_convex, recover_nonconvex, DEFAULT_PROJECTION_SWEEPS};
use crate::sketch::{make_jl, project, target_dim, JlFamily, JlMatrix, DEFAULT_C_JL};
use crate::util::child_seed;

const TAG_BASELINE: u64 = 0x4253; // "BS"
const TAG_MATRIX: u64 = 0x4a4c; // "JL"
const TAG_SOLVE: u64 = 0x534c; // "SL"

/// Sketch dimensions to sweep: an explicit list, or `"auto"` to derive a
/// sweep from the kernel's projection guarantee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DimsSpec {
    List(Vec<usize>),
    Named(String),
}

impl Default for DimsSpec {
    fn default() -> Self {
        DimsSpec::Named("auto".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverParams {
    pub iters: usize,
    pub restarts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    MeanShift,
    Brute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecoveryMode {
    Convex,
    NonConvex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    /// Kernel in `kind[:alpha]@bandwidth` form.
    pub kernel: String,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Projection failure probability.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_c_jl")]
    pub c_jl: f64,
    #[serde(default)]
    pub dims: DimsSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_baseline")]
    pub baseline: SolverParams,
    #[serde(default = "default_sketched")]
    pub sketched: SolverParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_method")]
    pub method: SolveMethod,
    #[serde(default = "default_recovery")]
    pub recovery: RecoveryMode,
    #[serde(default = "default_family")]
    pub family: JlFamily,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_budget")]
    pub budget: u128,
    /// Replaces the random projection with the identity (and forces
    /// `w = d`). Testing hook.
    #[serde(default)]
    pub identity_sketch: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_eps() -> f64 {
    0.2
}
fn default_delta() -> f64 {
    0.1
}
fn default_c_jl() -> f64 {
    DEFAULT_C_JL
}
fn default_trials() -> usize {
    10
}
fn default_baseline() -> SolverParams {
    SolverParams { iters: BASELINE_ITERS, restarts: BASELINE_RESTARTS }
}
fn default_sketched() -> SolverParams {
    SolverParams { iters: SKETCHED_ITERS, restarts: SKETCHED_RESTARTS }
}
fn default_method() -> SolveMethod {
    SolveMethod::MeanShift
}
fn default_recovery() -> RecoveryMode {
    RecoveryMode::Convex
}
fn default_family() -> JlFamily {
    JlFamily::Rademacher
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_budget() -> u128 {
    DEFAULT_GRID_BUDGET
}

impl ExperimentConfig {
    pub fn new(dataset: impl Into<PathBuf>, kernel: impl Into<String>) -> Self {
        Self {
            dataset: dataset.into(),
            kernel: kernel.into(),
            eps: default_eps(),
            delta: default_delta(),
            c_jl: default_c_jl(),
            dims: DimsSpec::default(),
            trials: default_trials(),
            baseline: default_baseline(),
            sketched: default_sketched(),
            seed: 0,
            method: default_method(),
            recovery: default_recovery(),
            family: default_family(),
            tol: default_tol(),
            budget: default_budget(),
            identity_sketch: false,
            output: None,
        }
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Domain(format!("eps must be in (0, 1), got {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Domain(format!("delta must be in (0, 1), got {}", self.delta)));
        }
        if self.trials == 0
            || self.baseline.iters == 0
            || self.baseline.restarts == 0
            || self.sketched.iters == 0
            || self.sketched.restarts == 0
        {
            return Err(Error::Domain("all iteration/restart/trial counts must be positive".into()));
        }
        if !(self.c_jl > 0.0) {
            return Err(Error::Domain(format!("c_jl must be positive, got {}", self.c_jl)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub w: usize,
    pub trial: usize,
    pub seed: u64,
    pub sketched_value: f64,
    pub recovered_value: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimAggregate {
    pub w: usize,
    pub mean_recovered: f64,
    pub std_recovered: f64,
    pub mean_sketched: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub w: usize,
    pub trial: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub library_version: String,
    pub config: ExperimentConfig,
    pub dims: Vec<usize>,
    pub baseline_value: f64,
    pub trials: Vec<TrialRecord>,
    pub aggregates: Vec<DimAggregate>,
    /// Trials that errored; aggregates cover the successful ones.
    pub failures: Vec<TrialFailure>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json())?;
        Ok(())
    }

    /// Flat per-trial rows for plotting.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path.as_ref())?;
        wtr.write_record(["w", "trial", "seed", "sketched_value", "recovered_value", "wall_ms"])?;
        for t in &self.trials {
            wtr.write_record([
                t.w.to_string(),
                t.trial.to_string(),
                t.seed.to_string(),
                format!("{}", t.sketched_value),
                format!("{}", t.recovered_value),
                format!("{}", t.wall_ms),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// The report with wall-clock fields zeroed; byte-identical across runs
    /// of the same config.
    pub fn deterministic_view(&self) -> ExperimentReport {
        let mut view = self.clone();
        for t in &mut view.trials {
            t.wall_ms = 0.0;
        }
        view
    }
}

/// Derives the sweep of sketch dimensions from the kernel's projection
/// guarantee: the designed `w*` plus its halvings `{w*/8, w*/4, w*/2, w*}`
/// (deduplicated when they collide).
pub fn auto_dims(
    kernel: &KernelSpec,
    n: usize,
    eps: f64,
    delta: f64,
    c_jl: f64,
) -> Result<Vec<usize>> {
    let gamma = kernel.gamma_for_epsilon(n, eps)?;
    let w_star = target_dim(n, gamma, delta, c_jl);
    let mut dims: Vec<usize> =
        [8, 4, 2, 1].iter().map(|f| w_star.div_ceil(*f)).collect();
    dims.dedup();
    Ok(dims)
}

/// Runs the full protocol: a mean-shift baseline on the original instance,
/// then for every sketch dimension and trial a fresh seeded projection,
/// low-dimensional solve, and high-dimensional recovery. Deterministic
/// given the config (trials derive child seeds from `(seed, w, trial)` and
/// run in parallel).
pub fn run_pipeline(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let data = Dataset::load_csv(&config.dataset)?;
    let kernel: KernelSpec = config.kernel.parse()?;
    run_pipeline_on(config, data, kernel)
}

/// [`run_pipeline`] with an already-loaded dataset and parsed kernel.
pub fn run_pipeline_on(
    config: &ExperimentConfig,
    data: Dataset,
    kernel: KernelSpec,
) -> Result<ExperimentReport> {
    config.validate()?;
    let n = data.len();
    let d = data.dim();
    let inst = KdeInstance::new(data, kernel);

    let baseline = multi_restart(
        &inst,
        config.baseline.restarts,
        config.baseline.iters,
        config.tol,
        child_seed(config.seed, TAG_BASELINE, 0, 0),
        false,
    )?;

    let dims: Vec<usize> = match &config.dims {
        DimsSpec::List(list) => {
            if list.is_empty() || list.iter().any(|&w| w == 0) {
                return Err(Error::Domain("sketch dimensions must be positive".into()));
            }
            list.clone()
        }
        DimsSpec::Named(name) if name == "auto" => {
            auto_dims(&kernel, n, config.eps, config.delta, config.c_jl)?
        }
        DimsSpec::Named(other) => {
            return Err(Error::Parse(format!("unknown dims spec `{other}`")))
        }
    };

    // The scaling target for drawn matrices; identity mode skips it.
    let gamma = if config.identity_sketch {
        0.0
    } else {
        inst.kernel().gamma_for_epsilon(n, config.eps)?
    };

    let jobs: Vec<(usize, usize)> = dims
        .iter()
        .flat_map(|&w| (0..config.trials).map(move |t| (w, t)))
        .collect();

    let outcomes: Vec<std::result::Result<TrialRecord, TrialFailure>> = jobs
        .par_iter()
        .map(|&(w, trial)| {
            run_trial(config, &inst, gamma, d, w, trial)
                .map_err(|e| TrialFailure { w, trial, error: e.to_string() })
        })
        .collect();

    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(t) => trials.push(t),
            Err(f) => failures.push(f),
        }
    }

    let mut aggregates = Vec::new();
    for &w in &dims {
        let vals: Vec<&TrialRecord> = trials.iter().filter(|t| t.w == effective_dim(config, d, w)).collect();
        if vals.is_empty() {
            continue;
        }
        let k = vals.len() as f64;
        let mean_recovered = vals.iter().map(|t| t.recovered_value).sum::<f64>() / k;
        let mean_sketched = vals.iter().map(|t| t.sketched_value).sum::<f64>() / k;
        let var = if vals.len() > 1 {
            vals.iter().map(|t| (t.recovered_value - mean_recovered).powi(2)).sum::<f64>()
                / (k - 1.0)
        } else {
            0.0
        };
        aggregates.push(DimAggregate {
            w: effective_dim(config, d, w),
            mean_recovered,
            std_recovered: var.sqrt(),
            mean_sketched,
        });
    }

    Ok(ExperimentReport {
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        dims,
        baseline_value: baseline.value,
        trials,
        aggregates,
        failures,
    })
}

fn effective_dim(config: &ExperimentConfig, d: usize, w: usize) -> usize {
    if config.identity_sketch {
        d
    } else {
        w
    }
}

fn run_trial(
    config: &ExperimentConfig,
    inst: &KdeInstance,
    gamma: f64,
    d: usize,
    w: usize,
    trial: usize,
) -> Result<TrialRecord> {
    let start = Instant::now();
    let matrix_seed = child_seed(config.seed, TAG_MATRIX, w as u64, trial as u64);
    let pi = if config.identity_sketch {
        JlMatrix::identity(d)
    } else {
        make_jl(d, w, config.family, gamma, matrix_seed)
    };
    let pair = project(&pi, inst.data())?;
    let sketched_inst = KdeInstance::new(pair.projected.clone(), *inst.kernel());

    let sketched: ModeResult = match config.method {
        SolveMethod::MeanShift => multi_restart(
            &sketched_inst,
            config.sketched.restarts,
            config.sketched.iters,
            config.tol,
            child_seed(config.seed, TAG_SOLVE, w as u64, trial as u64),
            false,
        )?,
        SolveMethod::Brute => {
            brute_force_mode_with_budget(&sketched_inst, config.eps, config.budget)?
        }
    };

    let recovered = match config.recovery {
        RecoveryMode::Convex => {
            recover_convex(inst.data(), &pair, &sketched.point, inst.kernel())?
        }
        RecoveryMode::NonConvex => recover_nonconvex(
            inst.data(),
            &pair,
            &sketched.point,
            inst.kernel(),
            config.eps,
            DEFAULT_PROJECTION_SWEEPS,
        )?,
    };

    Ok(TrialRecord {
        w: effective_dim(config, d, w),
        trial,
        seed: matrix_seed,
        sketched_value: sketched.value,
        recovered_value: recovered.value,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
