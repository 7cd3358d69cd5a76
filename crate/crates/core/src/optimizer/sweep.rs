use rayon::prelude::*;

use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::image::Image;

use super::{solve, OptimConfig, RunResult, Variant};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub alpha: f64,
    pub beta: f64,
    pub ours: RunResult,
    pub heuristic: RunResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub variant: Variant,
    pub points: Vec<SweepPoint>,
}

/// Runs the configured variant and the clipping baseline at each `alpha`
/// with the see-through coupling `beta = 1 - alpha`. Points are
/// independent and evaluated in parallel; the report keeps input order.
pub fn alpha_sweep(
    x: &Image,
    y: &Image,
    alphas: &[f64],
    config: &OptimConfig,
) -> Result<SweepReport> {
    if config.variant == Variant::Heuristic {
        return Err(Error::InvalidParameter(
            "the sweep compares a variant against the heuristic; pick a different variant".into(),
        ));
    }
    let heuristic_cfg = OptimConfig {
        variant: Variant::Heuristic,
        ..config.clone()
    };
    let points = alphas
        .par_iter()
        .map(|&alpha| {
            let device = DeviceParams::optical_see_through(alpha)?;
            Ok(SweepPoint {
                alpha,
                beta: device.beta(),
                ours: solve(x, y, device, config)?,
                heuristic: solve(x, y, device, &heuristic_cfg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        variant: config.variant,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> (Image, Image) {
        let x = Image::new(2, 3, 1, vec![0.9, 0.7, 0.8, 0.95, 0.6, 0.75]).unwrap();
        let y = Image::new(2, 3, 1, vec![0.1, 0.4, 0.2, 0.05, 0.3, 0.25]).unwrap();
        (x, y)
    }

    #[test]
    fn unconstrained_point_hits_cap() {
        let (x, y) = pair();
        let r = alpha_sweep(&x, &y, &[0.0], &OptimConfig::default()).unwrap();
        assert_eq!(r.points[0].ours.metrics.n_psnr, 99.0);
        assert_eq!(r.points[0].heuristic.metrics.n_psnr, 99.0);
    }

    #[test]
    fn zero_budget_point_matches_baseline() {
        let (x, y) = pair();
        let r = alpha_sweep(&x, &y, &[1.0], &OptimConfig::default()).unwrap();
        let p = &r.points[0];
        assert_eq!(p.beta, 0.0);
        assert_eq!(p.ours.output, x);
        assert_eq!(p.heuristic.output, x);
        assert_eq!(p.ours.metrics, p.heuristic.metrics);
        assert_eq!(p.ours.final_loss, p.heuristic.final_loss);
    }

    #[test]
    fn rejects_heuristic_as_primary() {
        let (x, y) = pair();
        let cfg = OptimConfig {
            variant: Variant::Heuristic,
            ..OptimConfig::default()
        };
        assert!(alpha_sweep(&x, &y, &[0.5], &cfg).is_err());
    }

    #[test]
    fn rejects_alpha_out_of_range() {
        let (x, y) = pair();
        assert!(alpha_sweep(&x, &y, &[1.5], &OptimConfig::default()).is_err());
    }
}
