//! Objective terms and evaluation metrics.
//!
//! Both loss terms are per-entry means over every pixel and channel, so the
//! constraint weight and the learning rate do not depend on image size.

use serde::{Deserialize, Serialize};

use crate::device::{affine_target, compose_output, residual, DeviceParams, Theta};
use crate::error::{Error, Result};
use crate::image::{normalize, Image};

/// PSNR reported when the normalized images (nearly) coincide.
pub const PSNR_CAP_DB: f64 = 99.0;
const PSNR_MSE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub sim: f64,
    /// Includes the constraint weight.
    pub constr: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(sim: f64, constr: f64) -> Self {
        Self {
            sim,
            constr,
            total: sim + constr,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.sim.is_finite() && self.constr.is_finite() && self.total.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationStats {
    /// Share of entries outside the band.
    pub fraction: f64,
    /// Mean clamp distance over all entries, feasible ones included.
    pub mean_magnitude: f64,
    pub max_magnitude: f64,
}

/// Which terms of the objective are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveVariant {
    Full,
    /// Similarity on raw intensities instead of normalized ones.
    NoNorm,
    NoConst,
    NoSim,
}

impl ObjectiveVariant {
    pub fn normalized(self) -> bool {
        self != ObjectiveVariant::NoNorm
    }

    pub fn uses_sim(self) -> bool {
        self != ObjectiveVariant::NoSim
    }

    pub fn uses_const(self) -> bool {
        self != ObjectiveVariant::NoConst
    }
}

fn mean_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    sum / a.len() as f64
}

pub fn perceptual_loss(a: &Image, b: &Image, normalized: bool) -> Result<f64> {
    a.ensure_same_shape(b)?;
    Ok(if normalized {
        mean_sq_diff(normalize(a).data(), normalize(b).data())
    } else {
        mean_sq_diff(a.data(), b.data())
    })
}

fn check_band(lo: f64, hi: f64) -> Result<()> {
    if lo > hi {
        return Err(Error::InvalidParameter(format!(
            "band lower bound {lo} exceeds upper bound {hi}"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn clamp_distance(v: f64, lo: f64, hi: f64) -> f64 {
    (v.clamp(lo, hi) - v).abs()
}

/// `gamma * mean |clamp(r, lo, hi) - r|`.
pub fn soft_constraint_loss(r: &Image, lo: f64, hi: f64, gamma: f64) -> Result<f64> {
    check_band(lo, hi)?;
    if gamma < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "constraint weight must be non-negative, got {gamma}"
        )));
    }
    let sum: f64 = r.data().iter().map(|&v| clamp_distance(v, lo, hi)).sum();
    Ok(gamma * sum / r.len() as f64)
}

/// Objective for an explicit target image `F`, with `O = compose(x, F)`.
pub fn objective_for_target(
    x: &Image,
    y: &Image,
    target: &Image,
    device: DeviceParams,
    gamma: f64,
    variant: ObjectiveVariant,
) -> Result<LossBreakdown> {
    x.ensure_same_shape(y)?;
    let sim = if variant.uses_sim() {
        let output = compose_output(x, target, device)?;
        perceptual_loss(&output, y, variant.normalized())?
    } else {
        0.0
    };
    let constr = if variant.uses_const() {
        let r = residual(x, target, device)?;
        soft_constraint_loss(&r, 0.0, device.beta(), gamma)?
    } else {
        0.0
    };
    Ok(LossBreakdown::new(sim, constr))
}

pub fn objective(
    x: &Image,
    y: &Image,
    theta: &Theta,
    device: DeviceParams,
    gamma: f64,
    variant: ObjectiveVariant,
) -> Result<LossBreakdown> {
    let target = affine_target(y, theta)?;
    objective_for_target(x, y, &target, device, gamma, variant)
}

/// PSNR (peak 1) between the normalized images, capped at [`PSNR_CAP_DB`].
pub fn n_psnr(a: &Image, b: &Image) -> Result<f64> {
    let mse = perceptual_loss(a, b, true)?;
    if mse < PSNR_MSE_FLOOR {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

pub fn violation_stats(r: &Image, lo: f64, hi: f64) -> Result<ViolationStats> {
    check_band(lo, hi)?;
    let mut outside = 0usize;
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for &v in r.data() {
        let d = clamp_distance(v, lo, hi);
        if d > 0.0 {
            outside += 1;
            sum += d;
            max = max.max(d);
        }
    }
    let n = r.len() as f64;
    Ok(ViolationStats {
        fraction: outside as f64 / n,
        mean_magnitude: sum / n,
        max_magnitude: max,
    })
}
