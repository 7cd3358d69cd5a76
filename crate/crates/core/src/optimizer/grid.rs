//! Exhaustive evaluation of the objective over a (gain, offset) grid.
//!
//! Serves as an independent check on the optimizer and as the source of
//! loss-landscape tables.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceParams, Theta, MIN_GAIN};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::losses::{objective, LossBreakdown, ObjectiveVariant};

/// Inclusive range `start, start + step, ..., <= stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridAxis {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        let axis = Self { start, stop, step };
        axis.validate()?;
        Ok(axis)
    }

    pub fn single(value: f64) -> Self {
        Self {
            start: value,
            stop: value,
            step: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = self.start.is_finite() && self.stop.is_finite() && self.step.is_finite();
        if !finite || self.step <= 0.0 || self.stop < self.start {
            return Err(Error::InvalidParameter(format!(
                "grid axis needs start <= stop and a positive step, got {}:{}:{}",
                self.start, self.stop, self.step
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        // Tolerate the stop value being a rounding error past the last step.
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        // Steps like 0.01 are 1/n for an integer n; dividing lattice indices by
        // n yields the nearest double to each decimal grid value.
        let per_unit = (1.0 / self.step).round();
        let first = (self.start * per_unit).round();
        let on_lattice = per_unit >= 1.0
            && (1.0 / self.step - per_unit).abs() < 1e-9 * per_unit
            && (self.start * per_unit - first).abs() < 1e-9 * per_unit.max(first.abs());
        (0..count)
            .map(|i| {
                if on_lattice {
                    (first + i as f64) / per_unit
                } else {
                    self.start + i as f64 * self.step
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub gain: GridAxis,
    pub offset: GridAxis,
}

impl GridSpec {
    /// Gain 0.10..=2.00 by 0.01, offset -1.00..=1.00 by 0.01.
    pub fn reference() -> Self {
        Self {
            gain: GridAxis {
                start: 0.1,
                stop: 2.0,
                step: 0.01,
            },
            offset: GridAxis {
                start: -1.0,
                stop: 1.0,
                step: 0.01,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub gain: f64,
    pub offset: f64,
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub argmin: Theta,
    pub min: LossBreakdown,
    /// Gain-major order.
    pub surface: Vec<GridPoint>,
}

impl GridResult {
    /// Columns `theta1,theta2,sim,constr,total`, shortest round-trip numbers.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "theta1,theta2,sim,constr,total")?;
        for p in &self.surface {
            writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?}",
                p.gain, p.offset, p.loss.sim, p.loss.constr, p.loss.total
            )?;
        }
        Ok(())
    }
}

/// Evaluates the objective at every grid point with a shared gain/offset.
/// The first point (gain-major) attaining the minimum total wins.
pub fn grid_oracle(
    x: &Image,
    y: &Image,
    device: DeviceParams,
    gamma: f64,
    variant: ObjectiveVariant,
    spec: &GridSpec,
) -> Result<GridResult> {
    x.ensure_same_shape(y)?;
    spec.gain.validate()?;
    spec.offset.validate()?;
    if spec.gain.start < MIN_GAIN {
        return Err(Error::InvalidParameter(format!(
            "grid gains must start at or above {MIN_GAIN}, got {}",
            spec.gain.start
        )));
    }
    let offsets = spec.offset.values();
    let rows: Vec<Vec<GridPoint>> = spec
        .gain
        .values()
        .into_par_iter()
        .map(|gain| {
            offsets
                .iter()
                .map(|&offset| {
                    let loss =
                        objective(x, y, &Theta::shared(gain, offset), device, gamma, variant)?;
                    Ok(GridPoint { gain, offset, loss })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let surface: Vec<GridPoint> = rows.into_iter().flatten().collect();

    let best = surface
        .iter()
        .fold(None::<&GridPoint>, |best, p| match best {
            Some(b) if b.loss.total <= p.loss.total => Some(b),
            _ => Some(p),
        })
        .copied()
        .expect("grid axes are non-empty");
    Ok(GridResult {
        argmin: Theta::shared(best.gain, best.offset),
        min: best.loss,
        surface,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(data: &[f64]) -> Image {
        Image::new(1, data.len(), 1, data.to_vec()).unwrap()
    }

    #[test]
    fn axis_values() {
        assert_eq!(GridAxis::single(1.0).values(), vec![1.0]);
        let v = GridSpec::reference().gain.values();
        assert_eq!(v.len(), 191);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[97], 1.07);
        assert_eq!(v[190], 2.0);
        let o = GridSpec::reference().offset.values();
        assert_eq!(o.len(), 201);
        assert_eq!((o[0], o[146], o[200]), (-1.0, 0.46, 1.0));
        let odd = GridAxis::new(0.25, 1.0, 0.3).unwrap().values();
        assert_eq!(odd.len(), 3);
        assert_eq!(odd[0], 0.25);
        assert!((odd[2] - 0.85).abs() < 1e-15);
        assert!(GridAxis::new(1.0, 0.0, 0.1).is_err());
        assert!(GridAxis::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn single_point_grid() {
        let d = DeviceParams::new(0.6, 0.4).unwrap();
        let x = gray(&[0.9, 0.4, 0.7]);
        let y = gray(&[0.1, 0.5, 0.3]);
        let spec = GridSpec {
            gain: GridAxis::single(1.0),
            offset: GridAxis::single(0.0),
        };
        let g = grid_oracle(&x, &y, d, 1.0, ObjectiveVariant::Full, &spec).unwrap();
        assert_eq!(g.argmin, Theta::identity());
        assert_eq!(g.surface.len(), 1);
        let direct = objective(&x, &y, &Theta::identity(), d, 1.0, ObjectiveVariant::Full).unwrap();
        assert_eq!(g.min, direct);
    }

    #[test]
    fn feasible_case_reaches_zero() {
        let vst = DeviceParams::new(0.0, 1.0).unwrap();
        let x = gray(&[0.9, 0.4, 0.7]);
        let y = gray(&[0.1, 0.5, 0.3]);
        let g = grid_oracle(
            &x,
            &y,
            vst,
            1.0,
            ObjectiveVariant::Full,
            &GridSpec::reference(),
        )
        .unwrap();
        assert!(g.min.total < 1e-20, "{:?}", g.min);
    }

    #[test]
    fn rejects_non_positive_gain() {
        let d = DeviceParams::new(0.6, 0.4).unwrap();
        let x = gray(&[0.9]);
        let spec = GridSpec {
            gain: GridAxis::single(0.0),
            offset: GridAxis::single(0.0),
        };
        assert!(grid_oracle(&x, &x, d, 1.0, ObjectiveVariant::Full, &spec).is_err());
    }

    #[test]
    fn csv_layout() {
        let d = DeviceParams::new(0.0, 1.0).unwrap();
        let x = gray(&[0.5, 0.25]);
        let spec = GridSpec {
            gain: GridAxis::single(1.0),
            offset: GridAxis::single(0.0),
        };
        let g = grid_oracle(&x, &x, d, 1.0, ObjectiveVariant::Full, &spec).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "theta1,theta2,sim,constr,total\n1.0,0.0,0.0,0.0,0.0\n"
        );
    }
}
