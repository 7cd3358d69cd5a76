//! `report.json` schema.
//!
//! Bump [`SCHEMA_VERSION`] on any change that renames, removes or retypes a field.

use std::path::Path;

use nonneg_core::{Generator, LossBreakdown, RunResult};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReportFile {
    pub schema_version: u32,
    pub inputs: RunInputs,
    pub result: RunSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInputs {
    pub input_path: String,
    pub proposal_path: String,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub variant: String,
    pub seed: u64,
    pub learning_rate: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
}

/// A scalar for the shared parameterization, one value per channel, or the
/// label `"per_pixel"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaValue {
    Scalar(f64),
    PerChannel(Vec<f64>),
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub theta1: ThetaValue,
    pub theta2: ThetaValue,
    pub iterations_run: usize,
    pub converged: bool,
    pub n_psnr_db: f64,
    pub violation_fraction: f64,
    pub violation_mean: f64,
    pub violation_max: f64,
    pub final_loss: LossBreakdown,
    /// Multiplier applied to the clamped residual in `residual.png`.
    pub residual_scale: f64,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub sim: f64,
    pub constr: f64,
    pub total: f64,
}

fn theta_values(generator: &Generator) -> (ThetaValue, ThetaValue) {
    match generator {
        Generator::Affine(t) if t.is_per_channel() => (
            ThetaValue::PerChannel(t.gain.clone()),
            ThetaValue::PerChannel(t.offset.clone()),
        ),
        Generator::Affine(t) => (
            ThetaValue::Scalar(t.gain[0]),
            ThetaValue::Scalar(t.offset[0]),
        ),
        Generator::PerPixel(_) => (
            ThetaValue::Label("per_pixel".into()),
            ThetaValue::Label("per_pixel".into()),
        ),
    }
}

/// Every `every`-th entry of the loss trace plus the last one; `every == 1`
/// keeps the full trace.
pub fn subsample_trace(trace: &[LossBreakdown], every: usize) -> Vec<TraceEntry> {
    let every = every.max(1);
    let last = trace.len().saturating_sub(1);
    trace
        .iter()
        .enumerate()
        .filter(|(i, _)| i % every == 0 || *i == last)
        .map(|(iter, l)| TraceEntry {
            iter,
            sim: l.sim,
            constr: l.constr,
            total: l.total,
        })
        .collect()
}

impl RunReportFile {
    pub fn from_result(
        inputs: RunInputs,
        result: &RunResult,
        residual_scale: f64,
        trace_every: Option<usize>,
    ) -> Self {
        let (theta1, theta2) = theta_values(&result.generator);
        let v = result.metrics.violations;
        Self {
            schema_version: SCHEMA_VERSION,
            inputs,
            result: RunSummary {
                theta1,
                theta2,
                iterations_run: result.iterations_run,
                converged: result.converged,
                n_psnr_db: result.metrics.n_psnr,
                violation_fraction: v.fraction,
                violation_mean: v.mean_magnitude,
                violation_max: v.max_magnitude,
                final_loss: result.final_loss,
                residual_scale,
                runtime_ms: result.runtime_ms,
            },
            trace: trace_every.map(|k| subsample_trace(&result.loss_trace, k)),
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(std::io::Error::other)
    }
}
