use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use nonneg_core::{GridAxis, Variant};

#[derive(Debug, Parser)]
#[command(
    name = "nonneg",
    version,
    about = "Re-target image proposals so they can be shown by only adding light"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize a single input/proposal pair.
    Run(RunArgs),
    /// Compare a variant against the clipping baseline over a range of alphas.
    Sweep(SweepArgs),
    /// Process every filename-matched pair of two directories.
    Batch(BatchArgs),
    /// Export the loss over a (theta1, theta2) grid.
    Landscape(LandscapeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PairArgs {
    /// Scene image seen through the combiner.
    #[arg(long)]
    pub input: PathBuf,
    /// Proposal from an unconstrained image translation model.
    #[arg(long)]
    pub proposal: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct OptimArgs {
    /// Constraint weight.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long = "lr", default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long = "iters", default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Keep every iteration in the report trace.
    #[arg(long)]
    pub full_trace: bool,
    /// Trace subsampling interval when --full-trace is not given.
    #[arg(long, default_value_t = 10)]
    pub trace_every: usize,
    /// Also write the unscaled clamped residual as residual_raw.png.
    #[arg(long)]
    pub raw_residual: bool,
}

impl OutputArgs {
    pub fn trace_interval(&self) -> usize {
        if self.full_trace {
            1
        } else {
            self.trace_every.max(1)
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Fraction of scene light passed by the combiner.
    #[arg(long)]
    pub alpha: f64,
    /// Display light budget; defaults to 1 - alpha.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value = "affine", value_parser = parse_variant)]
    pub variant: Variant,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("alpha_grid").required(true).args(["alphas", "alpha_steps"])))]
pub struct SweepArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Comma-separated alphas in [0, 1].
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Number of evenly spaced alphas covering [0, 1].
    #[arg(long)]
    pub alpha_steps: Option<usize>,
    /// Variant compared against the heuristic.
    #[arg(long, default_value = "affine", value_parser = parse_variant)]
    pub variant: Variant,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BatchArgs {
    #[arg(long)]
    pub input_dir: PathBuf,
    #[arg(long)]
    pub proposal_dir: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Comma-separated variants to run on every pair.
    #[arg(long, value_delimiter = ',', default_value = "affine,heuristic", value_parser = parse_variant)]
    pub variants: Vec<Variant>,
    /// Fail on files present in only one directory.
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Clone, Args)]
pub struct LandscapeArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Gain axis as start:stop:step.
    #[arg(long, default_value = "0.1:2:0.01", value_parser = parse_axis, allow_hyphen_values = true)]
    pub theta1: GridAxis,
    /// Offset axis as start:stop:step.
    #[arg(long, default_value = "-1:1:0.01", value_parser = parse_axis, allow_hyphen_values = true)]
    pub theta2: GridAxis,
    /// Compare normalized (on) or raw (off) intensities in the similarity term.
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    pub normalized: Toggle,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: nonneg_core::Error| e.to_string())
}

pub(crate) fn parse_axis(s: &str) -> Result<GridAxis, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums = match parts.as_slice() {
        [v] => {
            let v: f64 = v.parse().map_err(|e| format!("{s}: {e}"))?;
            return Ok(GridAxis::single(v));
        }
        [a, b, c] => [a, b, c]
            .iter()
            .map(|p| p.parse::<f64>().map_err(|e| format!("{s}: {e}")))
            .collect::<Result<Vec<_>, _>>()?,
        _ => {
            return Err(format!(
                "expected start:stop:step or a single value, got `{s}`"
            ))
        }
    };
    GridAxis::new(nums[0], nums[1], nums[2]).map_err(|e| e.to_string())
}
