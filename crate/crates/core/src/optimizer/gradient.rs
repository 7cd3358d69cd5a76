//! Analytic subgradient of the objective.
//!
//! Conventions:
//! - the clamp passes gradient 1 strictly inside `(0, beta)` and 0 elsewhere,
//!   including exactly on either bound;
//! - `|clamp(r) - r|` has derivative -1 below the band, +1 above, 0 inside or
//!   on a bound;
//! - normalization keeps the per-channel argmin/argmax of the output fixed at
//!   the current iterate (lowest flat index on ties).

use crate::device::{affine_target, compose_output, DeviceParams, Theta};
use crate::error::Result;
use crate::image::{channel_extrema, normalize, Image, RANGE_EPSILON};
use crate::losses::{clamp_distance, LossBreakdown, ObjectiveVariant};

use super::OptimConfig;

/// Objective value and its gradient with respect to every entry of the
/// target image `F`.
pub(crate) fn target_gradient(
    x: &Image,
    y: &Image,
    target: &Image,
    device: DeviceParams,
    gamma: f64,
    variant: ObjectiveVariant,
) -> Result<(LossBreakdown, Vec<f64>)> {
    x.ensure_same_shape(y)?;
    let output = compose_output(x, target, device)?;
    let n = target.len();
    let nf = n as f64;
    let (alpha, beta) = (device.alpha(), device.beta());
    let residual: Vec<f64> = target
        .data()
        .iter()
        .zip(x.data())
        .map(|(&t, &xv)| t - alpha * xv)
        .collect();

    let mut grad = vec![0.0; n];
    let mut sim = 0.0;
    if variant.uses_sim() {
        let d_out = if variant.normalized() {
            let (loss, d) = normalized_sim_grad(&output, y);
            sim = loss;
            d
        } else {
            let mut acc = 0.0;
            let d = output
                .data()
                .iter()
                .zip(y.data())
                .map(|(&o, &yv)| {
                    acc += (o - yv) * (o - yv);
                    2.0 * (o - yv) / nf
                })
                .collect::<Vec<_>>();
            sim = acc / nf;
            d
        };
        for ((g, &d), &r) in grad.iter_mut().zip(&d_out).zip(&residual) {
            if r > 0.0 && r < beta {
                *g += d;
            }
        }
    }

    let mut constr = 0.0;
    if variant.uses_const() {
        let mut acc = 0.0;
        for (g, &r) in grad.iter_mut().zip(&residual) {
            acc += clamp_distance(r, 0.0, beta);
            if r < 0.0 {
                *g -= gamma / nf;
            } else if r > beta {
                *g += gamma / nf;
            }
        }
        constr = gamma * acc / nf;
    }

    Ok((LossBreakdown::new(sim, constr), grad))
}

/// Mean squared difference of normalized images and its gradient with
/// respect to `a`.
fn normalized_sim_grad(a: &Image, b: &Image) -> (f64, Vec<f64>) {
    let na = normalize(a);
    let nb = normalize(b);
    let n = a.len();
    let c = a.channels();
    let ext = channel_extrema(a);

    let err: Vec<f64> = na
        .data()
        .iter()
        .zip(nb.data())
        .map(|(&u, &v)| u - v)
        .collect();
    let loss = err.iter().map(|e| e * e).sum::<f64>() / n as f64;

    let mut grad = vec![0.0; n];
    for ch in 0..c {
        let lo = a.data()[ext.argmin[ch]];
        let hi = a.data()[ext.argmax[ch]];
        let range = hi - lo;
        if range < RANGE_EPSILON {
            continue;
        }
        let mut via_min = 0.0;
        let mut via_max = 0.0;
        for k in (ch..n).step_by(c) {
            let e = 2.0 * err[k] / n as f64;
            let nk = na.data()[k];
            grad[k] += e / range;
            via_min += e * (nk - 1.0) / range;
            via_max -= e * nk / range;
        }
        grad[ext.argmin[ch]] += via_min;
        grad[ext.argmax[ch]] += via_max;
    }
    (loss, grad)
}

/// Chain the per-entry target gradient through `F = gain * y + offset`.
/// Output layout matches [`Theta::to_vec`].
pub(crate) fn theta_gradient(theta: &Theta, y: &Image, d_target: &[f64]) -> Vec<f64> {
    let slots = theta.gain.len();
    let c = y.channels();
    let mut g = vec![0.0; 2 * slots];
    for (k, (&d, &yv)) in d_target.iter().zip(y.data()).enumerate() {
        let s = theta.slot(k % c);
        g[s] += d * yv;
        g[slots + s] += d;
    }
    g
}

/// Gradient of the configured objective with respect to the affine
/// parameters, laid out as `[gains..., offsets...]`.
pub fn loss_gradient(
    x: &Image,
    y: &Image,
    theta: &Theta,
    device: DeviceParams,
    config: &OptimConfig,
) -> Result<Vec<f64>> {
    let target = affine_target(y, theta)?;
    let (_, d_target) = target_gradient(
        x,
        y,
        &target,
        device,
        config.gamma,
        config.variant.objective(),
    )?;
    Ok(theta_gradient(theta, y, &d_target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::objective;
    use crate::optimizer::Variant;

    fn gray(data: &[f64]) -> Image {
        Image::new(1, data.len(), 1, data.to_vec()).unwrap()
    }

    #[test]
    fn stationary_at_unconstrained_optimum() {
        let vst = DeviceParams::new(0.0, 1.0).unwrap();
        let x = gray(&[0.3, 0.9, 0.1, 0.6]);
        let y = gray(&[0.2, 0.7, 0.4, 0.55]);
        let g = loss_gradient(&x, &y, &Theta::identity(), vst, &OptimConfig::default()).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn constraint_only_probe() {
        let d = DeviceParams::new(1.0, 0.0).unwrap();
        let cfg = OptimConfig {
            variant: Variant::NoSim,
            gamma: 1.5,
            ..OptimConfig::default()
        };
        let g = loss_gradient(
            &gray(&[1.0]),
            &gray(&[0.0]),
            &Theta::shared(1.0, 0.5),
            d,
            &cfg,
        )
        .unwrap();
        assert_eq!(g, vec![0.0, -1.5]);
    }

    #[test]
    fn loss_matches_objective() {
        let d = DeviceParams::new(0.4, 0.6).unwrap();
        let x = gray(&[0.3, 0.9, 0.1, 0.6, 0.8]);
        let y = gray(&[0.2, 0.7, 0.4, 0.05, 0.95]);
        let theta = Theta::shared(1.3, -0.1);
        for variant in [
            ObjectiveVariant::Full,
            ObjectiveVariant::NoNorm,
            ObjectiveVariant::NoConst,
            ObjectiveVariant::NoSim,
        ] {
            let target = affine_target(&y, &theta).unwrap();
            let (l, _) = target_gradient(&x, &y, &target, d, 0.7, variant).unwrap();
            let expected = objective(&x, &y, &theta, d, 0.7, variant).unwrap();
            assert!((l.total - expected.total).abs() < 1e-14, "{variant:?}");
            assert!((l.sim - expected.sim).abs() < 1e-14, "{variant:?}");
        }
    }

    #[test]
    fn normalized_grad_matches_central_difference() {
        let a = gray(&[0.31, 0.72, 0.15, 0.55, 0.9, 0.4]);
        let b = gray(&[0.6, 0.1, 0.8, 0.35, 0.2, 0.5]);
        let (_, g) = normalized_sim_grad(&a, &b);
        let h = 1e-6;
        for k in 0..a.len() {
            let mut up = a.data().to_vec();
            let mut dn = a.data().to_vec();
            up[k] += h;
            dn[k] -= h;
            let fu = normalized_sim_grad(&gray(&up), &b).0;
            let fd = normalized_sim_grad(&gray(&dn), &b).0;
            let fd_grad = (fu - fd) / (2.0 * h);
            assert!(
                (fd_grad - g[k]).abs() < 1e-7,
                "entry {k}: {fd_grad} vs {}",
                g[k]
            );
        }
    }
}
