//! Optical combiner model.
//!
//! A combiner passes a fraction `alpha` of the scene light `x` and can add at
//! most `beta` of display light per pixel. The displayed image is therefore
//! `alpha * x + r` with the residual `r` restricted to `[0, beta]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Lower bound on the contrast gain. Non-positive gains invert the image.
pub const MIN_GAIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    alpha: f64,
    beta: f64,
}

impl DeviceParams {
    /// Optical see-through coupling: everything not transmitted is the
    /// display's light budget, `beta = 1 - alpha`.
    pub fn optical_see_through(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0 - alpha)
    }

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Affine re-targeting parameters: `gain * y + offset`.
///
/// Holds either one shared pair or one pair per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub gain: Vec<f64>,
    pub offset: Vec<f64>,
}

impl Theta {
    pub fn shared(gain: f64, offset: f64) -> Self {
        Self {
            gain: vec![gain],
            offset: vec![offset],
        }
    }

    pub fn identity() -> Self {
        Self::shared(1.0, 0.0)
    }

    pub fn per_channel(gain: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        if gain.len() != offset.len() || gain.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "per-channel theta needs equal non-empty gain/offset lengths, got {} and {}",
                gain.len(),
                offset.len()
            )));
        }
        Ok(Self { gain, offset })
    }

    pub fn identity_per_channel(channels: usize) -> Self {
        Self {
            gain: vec![1.0; channels],
            offset: vec![0.0; channels],
        }
    }

    pub fn is_per_channel(&self) -> bool {
        self.gain.len() > 1
    }

    /// Number of scalar parameters.
    pub fn len(&self) -> usize {
        self.gain.len() + self.offset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gain.is_empty()
    }

    /// Parameter index used for `channel`.
    pub(crate) fn slot(&self, channel: usize) -> usize {
        if self.gain.len() == 1 {
            0
        } else {
            channel
        }
    }

    pub(crate) fn check_channels(&self, channels: usize) -> Result<()> {
        if self.gain.len() != 1 && self.gain.len() != channels {
            return Err(Error::DimensionMismatch {
                left: format!("theta with {} channels", self.gain.len()),
                right: format!("image with {channels} channels"),
            });
        }
        Ok(())
    }

    /// Flattened as `[gains..., offsets...]`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.gain.iter().chain(&self.offset).copied().collect()
    }

    pub(crate) fn from_slice(params: &[f64]) -> Self {
        let (gain, offset) = params.split_at(params.len() / 2);
        Self {
            gain: gain.to_vec(),
            offset: offset.to_vec(),
        }
    }

    /// Keeps every gain at or above [`MIN_GAIN`].
    pub fn project(&mut self) {
        for g in &mut self.gain {
            if *g < MIN_GAIN {
                *g = MIN_GAIN;
            }
        }
    }
}

/// `gain * y + offset`, unclamped.
pub fn affine_target(y: &Image, theta: &Theta) -> Result<Image> {
    theta.check_channels(y.channels())?;
    let c = y.channels();
    let data = y
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let s = theta.slot(i % c);
            theta.gain[s] * v + theta.offset[s]
        })
        .collect();
    Ok(y.with_data(data))
}

/// Light the display has to add: `target - alpha * x`, unclamped.
pub fn residual(x: &Image, target: &Image, device: DeviceParams) -> Result<Image> {
    let a = device.alpha;
    target.zip_map(x, |t, xv| t - a * xv)
}

/// Realizable output: the residual clamped into `[0, beta]` on top of `alpha * x`.
pub fn compose_output(x: &Image, target: &Image, device: DeviceParams) -> Result<Image> {
    let (a, b) = (device.alpha, device.beta);
    target.zip_map(x, |t, xv| {
        let floor = a * xv;
        let mut out = (t - floor).clamp(0.0, b) + floor;
        // Rounding of the sum can leave `out - floor` one ulp above `b`.
        while out - floor > b {
            out = out.next_down();
        }
        out
    })
}

/// Clip the raw proposal into the feasible band with no re-targeting.
pub fn heuristic_baseline(x: &Image, y: &Image, device: DeviceParams) -> Result<Image> {
    compose_output(x, y, device)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(data: &[f64]) -> Image {
        Image::new(1, data.len(), 1, data.to_vec()).unwrap()
    }

    fn assert_close(a: &Image, b: &[f64]) {
        for (u, v) in a.data().iter().zip(b) {
            assert!((u - v).abs() < 1e-12, "{:?} vs {b:?}", a.data());
        }
    }

    #[test]
    fn device_validation() {
        let d = DeviceParams::optical_see_through(0.6).unwrap();
        assert_eq!(d.beta(), 1.0 - 0.6);
        assert!(DeviceParams::new(1.2, 0.0).is_err());
        assert!(DeviceParams::new(0.5, -0.1).is_err());
        assert!(DeviceParams::new(0.3, 0.2).is_ok());
    }

    #[test]
    fn affine_target_examples() {
        let y = gray(&[0.1, 0.7]);
        assert_eq!(affine_target(&y, &Theta::identity()).unwrap(), y);
        assert_close(
            &affine_target(&gray(&[0.5]), &Theta::shared(2.0, 0.1)).unwrap(),
            &[1.1],
        );
        assert_close(
            &affine_target(&gray(&[0.0, 1.0]), &Theta::shared(0.5, 0.25)).unwrap(),
            &[0.25, 0.75],
        );
    }

    #[test]
    fn per_channel_target() {
        let y = Image::new(1, 1, 3, vec![0.5, 0.5, 0.5]).unwrap();
        let t = Theta::per_channel(vec![1.0, 2.0, 0.5], vec![0.0, -0.5, 0.1]).unwrap();
        assert_close(&affine_target(&y, &t).unwrap(), &[0.5, 0.5, 0.35]);
        let bad = Theta::per_channel(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert!(affine_target(&y, &bad).is_err());
    }

    #[test]
    fn residual_examples() {
        let d = DeviceParams::new(0.6, 0.4).unwrap();
        assert_close(&residual(&gray(&[0.5]), &gray(&[0.2]), d).unwrap(), &[-0.1]);

        let vst = DeviceParams::new(0.0, 1.0).unwrap();
        let t = gray(&[0.3, -0.2]);
        assert_eq!(residual(&gray(&[0.9, 0.1]), &t, vst).unwrap(), t);

        let full = DeviceParams::new(1.0, 0.0).unwrap();
        let x = gray(&[0.3, 0.8]);
        assert_eq!(residual(&x, &x, full).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn residual_shape_mismatch() {
        let d = DeviceParams::new(0.5, 0.5).unwrap();
        assert!(matches!(
            residual(&gray(&[0.1]), &gray(&[0.1, 0.2]), d),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(compose_output(&gray(&[0.1]), &gray(&[0.1, 0.2]), d).is_err());
    }

    #[test]
    fn compose_examples() {
        let vst = DeviceParams::new(0.0, 1.0).unwrap();
        let x = gray(&[0.5, 0.5, 0.5]);
        assert_eq!(
            compose_output(&x, &gray(&[0.2, 1.3, -0.1]), vst)
                .unwrap()
                .data(),
            &[0.2, 1.0, 0.0]
        );

        let d = DeviceParams::new(0.6, 0.4).unwrap();
        assert_close(
            &compose_output(&gray(&[0.5]), &gray(&[0.2]), d).unwrap(),
            &[0.3],
        );

        let closed = DeviceParams::new(1.0, 0.0).unwrap();
        let x = gray(&[0.1, 0.9]);
        assert_eq!(compose_output(&x, &gray(&[5.0, -3.0]), closed).unwrap(), x);
    }

    #[test]
    fn heuristic_examples() {
        let vst = DeviceParams::new(0.0, 1.0).unwrap();
        let y = gray(&[0.0, 0.25, 1.0]);
        assert_eq!(
            heuristic_baseline(&gray(&[0.7, 0.1, 0.3]), &y, vst).unwrap(),
            y
        );

        let d = DeviceParams::new(0.6, 0.4).unwrap();
        assert_close(
            &heuristic_baseline(&gray(&[0.5]), &gray(&[0.2]), d).unwrap(),
            &[0.3],
        );

        let d = DeviceParams::new(0.5, 0.5).unwrap();
        assert_close(
            &heuristic_baseline(&gray(&[0.0]), &gray(&[0.9]), d).unwrap(),
            &[0.5],
        );
    }

    #[test]
    fn projection_floors_gain() {
        let mut t = Theta::per_channel(vec![-1.0, 0.5, 0.0], vec![0.0; 3]).unwrap();
        t.project();
        assert_eq!(t.gain, vec![MIN_GAIN, 0.5, MIN_GAIN]);
    }
}
