//! Approximate mode finding for kernel density estimates.
//!
//! The pipeline: project the centers with a random one-sided
//! Johnson-Lindenstrauss map, find an approximate mode of the
//! low-dimensional KDE (mean-shift or covering-grid brute force), then map
//! it back — a single weighted-centroid step for convex kernels, a
//! constructive Lipschitz extension otherwise. Also included: a box-kernel
//! instance generator that encodes `k`-clique, with an exact verifier.

pub mod cover;
pub mod error;
pub mod gadget;
pub mod kde;
pub mod kernels;
pub mod meanshift;
pub mod meb;
pub mod pipeline;
pub mod recovery;
pub mod sketch;
mod util;

pub use cover::{brute_force_mode, cover_points, delta_for_eps, CoverSpec};
pub use error::{Error, Result};
pub use gadget::{build_gadget, incidence_embed, max_covered, verify_gadget, GadgetInstance, RegularGraph};
pub use kde::{Dataset, KdeInstance};
pub use kernels::{KernelKind, KernelSpec, RatioBound, RdsParams};
pub use meanshift::{mean_shift, mean_shift_step, multi_restart, Method, ModeResult};
pub use meb::{min_enclosing_ball, Ball};
pub use pipeline::{auto_dims, run_pipeline, DimsSpec, ExperimentConfig, ExperimentReport};
pub use recovery::{recover_convex, recover_nonconvex};
pub use sketch::{
    make_jl, project, sketch_with_retry, target_dim, verify_one_sided, JlFamily, JlMatrix,
    SketchPair,
};
