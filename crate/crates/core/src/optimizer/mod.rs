//! First-order search over the re-targeting parameters.
//!
//! Starting from the identity `gain = 1, offset = 0`, Adam minimizes the
//! similarity between the realizable output and the proposal plus the soft
//! constraint on the residual. The run stops when the total loss plateaus
//! over a trailing window or the iteration budget is spent, and returns the
//! best iterate seen.

mod adam;
mod gradient;
mod grid;
mod sweep;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::device::{affine_target, compose_output, residual, DeviceParams, Theta, MIN_GAIN};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::losses::{
    n_psnr, objective_for_target, violation_stats, LossBreakdown, ObjectiveVariant, ViolationStats,
};

use adam::Adam;
use gradient::{target_gradient, theta_gradient};

pub use gradient::loss_gradient;
pub use grid::{grid_oracle, GridAxis, GridPoint, GridResult, GridSpec};
pub use sweep::{alpha_sweep, SweepPoint, SweepReport};

/// Number of iterations the plateau test looks back over.
pub const CONVERGENCE_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Shared gain/offset, full objective.
    Affine,
    PerChannelAffine,
    /// Every target entry is a free parameter.
    PerPixel,
    /// Clip the raw proposal, no optimization.
    Heuristic,
    NoNorm,
    NoConst,
    NoSim,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Affine,
        Variant::PerChannelAffine,
        Variant::PerPixel,
        Variant::Heuristic,
        Variant::NoNorm,
        Variant::NoConst,
        Variant::NoSim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Affine => "affine",
            Variant::PerChannelAffine => "per_channel_affine",
            Variant::PerPixel => "per_pixel",
            Variant::Heuristic => "heuristic",
            Variant::NoNorm => "no_norm",
            Variant::NoConst => "no_const",
            Variant::NoSim => "no_sim",
        }
    }

    pub fn objective(self) -> ObjectiveVariant {
        match self {
            Variant::NoNorm => ObjectiveVariant::NoNorm,
            Variant::NoConst => ObjectiveVariant::NoConst,
            Variant::NoSim => ObjectiveVariant::NoSim,
            _ => ObjectiveVariant::Full,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown variant `{s}`, expected one of: {}",
                    Variant::ALL.map(Variant::name).join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Relative change of the total loss over [`CONVERGENCE_WINDOW`]
    /// iterations below which the run stops.
    pub rel_tol: f64,
    pub gamma: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub variant: Variant,
    /// Recorded for reproducibility; every initialization is currently deterministic.
    pub seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_iters: 500,
            rel_tol: 1e-6,
            gamma: 1.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            variant: Variant::Affine,
            seed: 0,
        }
    }
}

impl OptimConfig {
    fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidParameter(what));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        if self.rel_tol.is_nan() || self.rel_tol < 0.0 {
            return bad(format!(
                "rel_tol must be non-negative, got {}",
                self.rel_tol
            ));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be non-negative, got {}", self.gamma));
        }
        Ok(())
    }
}

/// What the search settled on.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Affine(Theta),
    PerPixel(Image),
}

impl Generator {
    pub fn theta(&self) -> Option<&Theta> {
        match self {
            Generator::Affine(t) => Some(t),
            Generator::PerPixel(_) => None,
        }
    }

    fn target(&self, y: &Image) -> Result<Image> {
        match self {
            Generator::Affine(t) => affine_target(y, t),
            Generator::PerPixel(t) => Ok(t.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    /// Between the realizable output and the proposal.
    pub n_psnr: f64,
    /// Of the target residual against `[0, beta]`.
    pub violations: ViolationStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub variant: Variant,
    pub generator: Generator,
    pub output: Image,
    pub target: Image,
    /// Loss at every evaluated iterate; entry 0 is the identity start.
    pub loss_trace: Vec<LossBreakdown>,
    /// Loss of the returned iterate (the lowest total in the trace).
    pub final_loss: LossBreakdown,
    pub iterations_run: usize,
    pub converged: bool,
    pub metrics: RunMetrics,
    pub runtime_ms: f64,
}

/// Where a search ended, before the output and metrics are derived.
struct Search {
    generator: Generator,
    loss_trace: Vec<LossBreakdown>,
    final_loss: LossBreakdown,
    iterations_run: usize,
    converged: bool,
}

impl Search {
    fn immediate(generator: Generator, loss: LossBreakdown) -> Self {
        Self {
            generator,
            loss_trace: vec![loss],
            final_loss: loss,
            iterations_run: 0,
            converged: true,
        }
    }
}

fn finish(
    x: &Image,
    y: &Image,
    device: DeviceParams,
    variant: Variant,
    search: Search,
    started: Instant,
) -> Result<RunResult> {
    let Search {
        generator,
        loss_trace,
        final_loss,
        iterations_run,
        converged,
    } = search;
    let target = generator.target(y)?;
    let output = compose_output(x, &target, device)?;
    let metrics = RunMetrics {
        n_psnr: n_psnr(&output, y)?,
        violations: violation_stats(&residual(x, &target, device)?, 0.0, device.beta())?,
    };
    Ok(RunResult {
        variant,
        generator,
        output,
        target,
        loss_trace,
        final_loss,
        iterations_run,
        converged,
        metrics,
        runtime_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

fn plateaued(trace: &[LossBreakdown], rel_tol: f64) -> bool {
    if trace.len() <= CONVERGENCE_WINDOW {
        return false;
    }
    let last = trace[trace.len() - 1].total;
    let before = trace[trace.len() - 1 - CONVERGENCE_WINDOW].total;
    (last - before).abs() <= rel_tol * before.abs()
}

/// Runs Adam from the identity re-targeting (or from `target = y` for the
/// per-pixel variant) and returns the best iterate.
///
/// With a zero light budget (`beta == 0`) the output is `alpha * x` for any
/// parameters, so the identity start is returned without iterating.
pub fn optimize(
    x: &Image,
    y: &Image,
    device: DeviceParams,
    config: &OptimConfig,
) -> Result<RunResult> {
    let started = Instant::now();
    x.ensure_same_shape(y)?;
    config.validate()?;
    let variant = config.variant;
    let objective = variant.objective();

    let (mut params, per_pixel, init_theta) = match variant {
        Variant::Heuristic => return Err(Error::UnsupportedVariant("heuristic")),
        Variant::PerPixel => (y.data().to_vec(), true, None),
        Variant::PerChannelAffine => {
            let t = Theta::identity_per_channel(y.channels());
            (t.to_vec(), false, Some(t))
        }
        _ => {
            let t = Theta::identity();
            (t.to_vec(), false, Some(t))
        }
    };
    let to_generator = |p: &[f64]| -> Generator {
        if per_pixel {
            Generator::PerPixel(y.with_data(p.to_vec()))
        } else {
            Generator::Affine(Theta::from_slice(p))
        }
    };

    if device.beta() == 0.0 {
        let generator = to_generator(&params);
        let target = generator.target(y)?;
        let loss = objective_for_target(x, y, &target, device, config.gamma, objective)?;
        return finish(
            x,
            y,
            device,
            variant,
            Search::immediate(generator, loss),
            started,
        );
    }

    let mut adam = Adam::new(
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_eps,
        params.len(),
    );
    let mut trace = Vec::with_capacity(config.max_iters + 1);
    let mut best: Option<(LossBreakdown, Vec<f64>)> = None;
    let mut steps = 0;
    let mut converged = false;

    for iteration in 0..=config.max_iters {
        let generator = to_generator(&params);
        let target = generator.target(y)?;
        let (loss, d_target) = target_gradient(x, y, &target, device, config.gamma, objective)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration });
        }
        trace.push(loss);
        if best.as_ref().is_none_or(|(b, _)| loss.total < b.total) {
            best = Some((loss, params.clone()));
        }
        if plateaued(&trace, config.rel_tol) {
            converged = true;
            break;
        }
        if iteration == config.max_iters {
            break;
        }

        let grad = match &generator {
            Generator::Affine(theta) => theta_gradient(theta, y, &d_target),
            Generator::PerPixel(_) => d_target,
        };
        adam.step(&mut params, &grad);
        if let Some(t) = &init_theta {
            let slots = t.gain.len();
            for g in &mut params[..slots] {
                if *g < MIN_GAIN {
                    *g = MIN_GAIN;
                }
            }
        }
        steps += 1;
    }

    let (final_loss, best_params) = best.expect("at least one iterate is evaluated");
    let search = Search {
        generator: to_generator(&best_params),
        loss_trace: trace,
        final_loss,
        iterations_run: steps,
        converged,
    };
    finish(x, y, device, variant, search, started)
}

/// Like [`optimize`], but also accepts [`Variant::Heuristic`], which clips
/// the raw proposal and reports the full objective at the identity.
pub fn solve(
    x: &Image,
    y: &Image,
    device: DeviceParams,
    config: &OptimConfig,
) -> Result<RunResult> {
    if config.variant != Variant::Heuristic {
        return optimize(x, y, device, config);
    }
    let started = Instant::now();
    x.ensure_same_shape(y)?;
    let generator = Generator::Affine(Theta::identity());
    let loss = objective_for_target(x, y, y, device, config.gamma, ObjectiveVariant::Full)?;
    let search = Search::immediate(generator, loss);
    finish(x, y, device, Variant::Heuristic, search, started)
}
