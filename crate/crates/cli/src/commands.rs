use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use nonneg_core::{
    alpha_sweep, grid_oracle, load_image, residual, save_image, solve, DeviceParams, GridAxis,
    GridSpec, Image, LossBreakdown, ObjectiveVariant, OptimConfig, RunResult, Variant,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::{
    BatchArgs, Cli, Command, LandscapeArgs, OptimArgs, OutputArgs, PairArgs, RunArgs, SweepArgs,
    Toggle,
};
use crate::report::{RunInputs, RunReportFile, SCHEMA_VERSION};
use crate::{CliError, Result, THREADS_ENV};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "pgm", "ppm", "pnm"];

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => cmd_run(&a).map(drop),
        Command::Sweep(a) => cmd_sweep(&a).map(drop),
        Command::Batch(a) => cmd_batch(&a).map(drop),
        Command::Landscape(a) => cmd_landscape(&a).map(drop),
    }
}

fn device(alpha: f64, beta: Option<f64>) -> Result<DeviceParams> {
    Ok(match beta {
        Some(b) => DeviceParams::new(alpha, b)?,
        None => DeviceParams::optical_see_through(alpha)?,
    })
}

fn config(optim: &OptimArgs, variant: Variant) -> OptimConfig {
    OptimConfig {
        learning_rate: optim.learning_rate,
        max_iters: optim.max_iters,
        rel_tol: optim.rel_tol,
        gamma: optim.gamma,
        variant,
        seed: optim.seed,
        ..OptimConfig::default()
    }
}

fn load_pair(pair: &PairArgs) -> Result<(Image, Image)> {
    let x = load_image(&pair.input)?;
    let y = load_image(&pair.proposal)?;
    x.ensure_same_shape(&y)?;
    Ok((x, y))
}

/// Runs `f` on a pool capped by `NONNEG_THREADS` when the variable is set.
fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(f());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "{THREADS_ENV} must be a positive integer, got `{raw}`"
        ))
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Other(e.to_string()))?;
    Ok(pool.install(f))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Writes `output.png`, `target.png`, `residual.png` (optionally
/// `residual_raw.png`) and `report.json` into `dir`.
fn write_run_dir(
    dir: &Path,
    x: &Image,
    device: DeviceParams,
    result: &RunResult,
    inputs: RunInputs,
    out: &OutputArgs,
) -> Result<RunReportFile> {
    create_dir(dir)?;
    save_image(&result.output, dir.join("output.png"))?;
    save_image(&result.target.clamped(0.0, 1.0), dir.join("target.png"))?;

    let beta = device.beta();
    let feasible = residual(x, &result.target, device)?.clamped(0.0, beta);
    let scale = if beta > 0.0 { 1.0 / beta } else { 1.0 };
    save_image(&feasible.map(|v| v * scale), dir.join("residual.png"))?;
    if out.raw_residual {
        save_image(&feasible, dir.join("residual_raw.png"))?;
    }

    let report = RunReportFile::from_result(inputs, result, scale, Some(out.trace_interval()));
    let text = report
        .to_json()
        .map_err(|e| CliError::Other(e.to_string()))?;
    write_text(&dir.join("report.json"), &text)?;
    Ok(report)
}

fn run_inputs(input: &Path, proposal: &Path, device: DeviceParams, cfg: &OptimConfig) -> RunInputs {
    RunInputs {
        input_path: input.display().to_string(),
        proposal_path: proposal.display().to_string(),
        alpha: device.alpha(),
        beta: device.beta(),
        gamma: cfg.gamma,
        variant: cfg.variant.name().to_string(),
        seed: cfg.seed,
        learning_rate: cfg.learning_rate,
        max_iters: cfg.max_iters,
        rel_tol: cfg.rel_tol,
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<RunReportFile> {
    let device = device(args.alpha, args.beta)?;
    let cfg = config(&args.optim, args.variant);
    let (x, y) = load_pair(&args.pair)?;
    let result = solve(&x, &y, device, &cfg)?;
    let inputs = run_inputs(&args.pair.input, &args.pair.proposal, device, &cfg);
    write_run_dir(
        &args.output.out_dir,
        &x,
        device,
        &result,
        inputs,
        &args.output,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub method: String,
    pub n_psnr_db: f64,
    pub violation_fraction: f64,
    pub violation_mean: f64,
    pub final_total_loss: f64,
}

fn sweep_alphas(args: &SweepArgs) -> Result<Vec<f64>> {
    let alphas = match (&args.alphas, args.alpha_steps) {
        (Some(list), _) => list.clone(),
        (None, Some(0)) => return Err(CliError::Usage("--alpha-steps must be positive".into())),
        (None, Some(1)) => vec![0.0],
        (None, Some(n)) => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
        (None, None) => return Err(CliError::Usage("give --alphas or --alpha-steps".into())),
    };
    if let Some(bad) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(CliError::Usage(format!("alpha {bad} is outside [0, 1]")));
    }
    Ok(alphas)
}

fn sweep_row(alpha: f64, r: &RunResult) -> SweepRow {
    SweepRow {
        alpha,
        method: r.variant.name().to_string(),
        n_psnr_db: r.metrics.n_psnr,
        violation_fraction: r.metrics.violations.fraction,
        violation_mean: r.metrics.violations.mean_magnitude,
        final_total_loss: r.final_loss.total,
    }
}

/// Runs the sweep and writes `alpha_<a>/<method>/` run directories plus
/// `sweep.csv`, rows ordered by `(alpha, method)`.
pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<SweepRow>> {
    let alphas = sweep_alphas(args)?;
    if args.variant == Variant::Heuristic {
        return Err(CliError::Usage(
            "--variant heuristic is always included; pick the variant to compare against it".into(),
        ));
    }
    let cfg = config(&args.optim, args.variant);
    let (x, y) = load_pair(&args.pair)?;
    let report = with_thread_cap(|| alpha_sweep(&x, &y, &alphas, &cfg))??;

    let root = &args.output.out_dir;
    create_dir(root)?;
    let mut rows = Vec::with_capacity(2 * report.points.len());
    for p in &report.points {
        let device = DeviceParams::new(p.alpha, p.beta)?;
        let point_dir = root.join(format!("alpha_{}", p.alpha));
        for r in [&p.ours, &p.heuristic] {
            let run_cfg = OptimConfig {
                variant: r.variant,
                ..cfg.clone()
            };
            let inputs = run_inputs(&args.pair.input, &args.pair.proposal, device, &run_cfg);
            write_run_dir(
                &point_dir.join(r.variant.name()),
                &x,
                device,
                r,
                inputs,
                &args.output,
            )?;
            rows.push(sweep_row(p.alpha, r));
        }
    }
    rows.sort_by(|a, b| {
        a.alpha
            .total_cmp(&b.alpha)
            .then_with(|| a.method.cmp(&b.method))
    });

    let path = root.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    w.write_record([
        "alpha",
        "method",
        "n_psnr_db",
        "violation_fraction",
        "violation_mean",
        "final_total_loss",
    ])
    .map_err(|e| csv_error(&path, e))?;
    for r in &rows {
        w.write_record([
            format!("{:?}", r.alpha),
            r.method.clone(),
            format!("{:?}", r.n_psnr_db),
            format!("{:?}", r.violation_fraction),
            format!("{:?}", r.violation_mean),
            format!("{:?}", r.final_total_loss),
        ])
        .map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub median: Option<f64>,
}

impl Summary {
    /// `values` must already be in a canonical order so the sum is reproducible.
    fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: None,
                median: None,
            };
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        Self {
            mean: Some(mean),
            median: Some(median),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantAggregate {
    pub pairs: usize,
    pub n_psnr_db: Summary,
    pub violation_fraction: Summary,
    pub violation_mean: Summary,
    pub violation_max: Summary,
    pub final_total_loss: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub schema_version: u32,
    pub pairs: usize,
    pub unmatched: Vec<String>,
    pub variants: BTreeMap<String, VariantAggregate>,
}

fn list_images(dir: &Path) -> Result<BTreeSet<String>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut names = BTreeSet::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let path = entry.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if path.is_file() && is_image {
            names.insert(entry.file_name().to_string_lossy().into_owned());
        }
    }
    Ok(names)
}

/// Processes filename-matched pairs independently and writes per-pair run
/// directories under `<out>/<variant>/<file name>/` plus `aggregate.json`.
pub fn cmd_batch(args: &BatchArgs) -> Result<Aggregate> {
    let device = device(args.alpha, args.beta)?;
    if args.variants.is_empty() {
        return Err(CliError::Usage(
            "--variants must name at least one variant".into(),
        ));
    }
    let variants: Vec<Variant> = args
        .variants
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let inputs = list_images(&args.input_dir)?;
    let proposals = list_images(&args.proposal_dir)?;
    let matched: Vec<String> = inputs.intersection(&proposals).cloned().collect();
    let unmatched: Vec<String> = inputs.symmetric_difference(&proposals).cloned().collect();
    if !unmatched.is_empty() {
        if args.strict {
            return Err(CliError::Unmatched(unmatched));
        }
        for name in &unmatched {
            eprintln!("skipping unmatched file: {name}");
        }
    }

    let jobs: Vec<(String, Variant)> = matched
        .iter()
        .flat_map(|name| variants.iter().map(move |&v| (name.clone(), v)))
        .collect();
    let out = &args.output;
    let reports: Vec<(String, Variant, RunReportFile)> = with_thread_cap(|| {
        jobs.par_iter()
            .map(|(name, variant)| {
                let input = args.input_dir.join(name);
                let proposal = args.proposal_dir.join(name);
                let (x, y) = load_pair(&PairArgs {
                    input: input.clone(),
                    proposal: proposal.clone(),
                })?;
                let cfg = config(&args.optim, *variant);
                let result = solve(&x, &y, device, &cfg)?;
                let dir = out.out_dir.join(variant.name()).join(name);
                let report = write_run_dir(
                    &dir,
                    &x,
                    device,
                    &result,
                    run_inputs(&input, &proposal, device, &cfg),
                    out,
                )?;
                Ok((name.clone(), *variant, report))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut per_variant = BTreeMap::new();
    for &variant in &variants {
        // `reports` follows `jobs`, which is sorted by file name.
        let rows: Vec<&RunReportFile> = reports
            .iter()
            .filter(|(_, v, _)| *v == variant)
            .map(|(_, _, r)| r)
            .collect();
        let pick = |f: fn(&RunReportFile) -> f64| {
            Summary::of(&rows.iter().map(|r| f(r)).collect::<Vec<_>>())
        };
        per_variant.insert(
            variant.name().to_string(),
            VariantAggregate {
                pairs: rows.len(),
                n_psnr_db: pick(|r| r.result.n_psnr_db),
                violation_fraction: pick(|r| r.result.violation_fraction),
                violation_mean: pick(|r| r.result.violation_mean),
                violation_max: pick(|r| r.result.violation_max),
                final_total_loss: pick(|r| r.result.final_loss.total),
            },
        );
    }
    let aggregate = Aggregate {
        schema_version: SCHEMA_VERSION,
        pairs: matched.len(),
        unmatched,
        variants: per_variant,
    };
    create_dir(&out.out_dir)?;
    write_json(&out.out_dir.join("aggregate.json"), &aggregate)?;
    Ok(aggregate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeInputs {
    pub input_path: String,
    pub proposal_path: String,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub normalized: bool,
    pub theta1: GridAxis,
    pub theta2: GridAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeArgmin {
    pub theta1: f64,
    pub theta2: f64,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeReport {
    pub schema_version: u32,
    pub inputs: LandscapeInputs,
    pub points: usize,
    pub landscape_argmin: LandscapeArgmin,
}

/// Writes `landscape.csv` and `report.json` with the grid argmin.
pub fn cmd_landscape(args: &LandscapeArgs) -> Result<LandscapeReport> {
    let device = device(args.alpha, args.beta)?;
    if !args.gamma.is_finite() || args.gamma < 0.0 {
        return Err(CliError::Usage(format!(
            "--gamma must be non-negative, got {}",
            args.gamma
        )));
    }
    let (x, y) = load_pair(&args.pair)?;
    let normalized = args.normalized == Toggle::On;
    let variant = if normalized {
        ObjectiveVariant::Full
    } else {
        ObjectiveVariant::NoNorm
    };
    let spec = GridSpec {
        gain: args.theta1,
        offset: args.theta2,
    };
    let grid = with_thread_cap(|| grid_oracle(&x, &y, device, args.gamma, variant, &spec))??;

    create_dir(&args.out_dir)?;
    let csv_path = args.out_dir.join("landscape.csv");
    let mut buf = Vec::new();
    grid.write_csv(&mut buf)
        .map_err(|e| CliError::io(&csv_path, e))?;
    fs::write(&csv_path, buf).map_err(|e| CliError::io(&csv_path, e))?;

    let report = LandscapeReport {
        schema_version: SCHEMA_VERSION,
        inputs: LandscapeInputs {
            input_path: args.pair.input.display().to_string(),
            proposal_path: args.pair.proposal.display().to_string(),
            alpha: device.alpha(),
            beta: device.beta(),
            gamma: args.gamma,
            normalized,
            theta1: args.theta1,
            theta2: args.theta2,
        },
        points: grid.surface.len(),
        landscape_argmin: LandscapeArgmin {
            theta1: grid.argmin.gain[0],
            theta2: grid.argmin.offset[0],
            loss: grid.min,
        },
    };
    write_json(&args.out_dir.join("report.json"), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_mean_and_median() {
        let s = Summary::of(&[3.0, 1.0, 2.0]);
        assert_eq!((s.mean, s.median), (Some(2.0), Some(2.0)));
        let s = Summary::of(&[4.0, 1.0]);
        assert_eq!((s.mean, s.median), (Some(2.5), Some(2.5)));
        let s = Summary::of(&[0.7, 0.7]);
        assert_eq!(s.mean, Some(0.7));
        assert_eq!(Summary::of(&[]).mean, None);
    }
}
