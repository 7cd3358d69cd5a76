//! Non-negative image synthesis for additive displays.
//!
//! Given a scene image `x`, a proposal `y` produced by some unconstrained
//! image translation model, and the optical combiner parameters, this crate
//! searches for a contrast/brightness re-targeting `gain * y + offset` whose
//! residual over the attenuated scene can actually be displayed, i.e. lies in
//! `[0, beta]` everywhere. Similarity is judged after a per-channel
//! histogram stretch, so any positive affine change of `y` is free.
//!
//! Modules:
//! - [`image`]: pixel buffers, PNG/PNM I/O, normalization.
//! - [`device`]: combiner model, realizable output, clipping baseline.
//! - [`losses`]: similarity and soft-constraint terms, N-PSNR, violation statistics.
//! - [`optimizer`]: Adam over the re-targeting parameters, grid oracle, alpha sweeps.

pub mod device;
pub mod error;
pub mod image;
pub mod losses;
pub mod optimizer;

pub use device::{
    affine_target, compose_output, heuristic_baseline, residual, DeviceParams, Theta, MIN_GAIN,
};
pub use error::{Error, Result};
pub use image::{channel_stats, load_image, normalize, save_image, ChannelStats, Image};
pub use losses::{
    n_psnr, objective, perceptual_loss, soft_constraint_loss, violation_stats, LossBreakdown,
    ObjectiveVariant, ViolationStats,
};
pub use optimizer::{
    alpha_sweep, grid_oracle, loss_gradient, optimize, solve, Generator, GridAxis, GridResult,
    GridSpec, OptimConfig, RunMetrics, RunResult, SweepPoint, SweepReport, Variant,
};
