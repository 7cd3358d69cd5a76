//! Pixel buffers, raster I/O and dynamic-range normalization.
//!
//! Intensities are stored as `f64` in row-major `(row, column, channel)`
//! order. Files are 8-bit; a byte `v` maps to `v / 255` on load and an
//! intensity maps back to `round(clamp(v, 0, 1) * 255)` on save. No gamma
//! conversion is applied in either direction.

use std::path::Path;

use image::{ColorType, DynamicImage, ExtendedColorType, ImageReader};

use crate::error::{Error, Result};

/// Channel ranges narrower than this normalize to all zeros.
pub const RANGE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidImage(format!(
                "expected {} values for {height}x{width}x{channels}, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!(
                "non-finite intensity at flat index {pos}"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    /// Same shape, new values. Callers guarantee `data.len() == self.len()`.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Image, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_shape(other)?;
        Ok(self.with_data(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn ensure_same_shape(&self, other: &Image) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                left: describe_shape(self.shape()),
                right: describe_shape(other.shape()),
            });
        }
        Ok(())
    }

    pub fn clamped(&self, lo: f64, hi: f64) -> Self {
        self.map(|v| v.clamp(lo, hi))
    }

    /// Values of one channel in flat pixel order.
    pub fn channel_values(&self, channel: usize) -> impl Iterator<Item = f64> + '_ {
        self.data
            .iter()
            .skip(channel)
            .step_by(self.channels)
            .copied()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }
}

fn describe_shape((h, w, c): (usize, usize, usize)) -> String {
    format!("{h}x{w}x{c}")
}

/// 8-bit quantization used for every file write.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let read_err = |source| Error::Read {
        path: path.to_path_buf(),
        source,
    };
    let decoded = ImageReader::open(path)
        .map_err(|e| read_err(e.into()))?
        .with_guessed_format()
        .map_err(|e| read_err(e.into()))?
        .decode()
        .map_err(read_err)?;

    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let unsupported = |reason: String| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        reason,
    };
    let (channels, bytes) = match decoded {
        DynamicImage::ImageLuma8(buf) => (1, buf.into_raw()),
        DynamicImage::ImageRgb8(buf) => (3, buf.into_raw()),
        other => {
            let color = other.color();
            return Err(unsupported(match color {
                ColorType::La8 | ColorType::Rgba8 | ColorType::La16 | ColorType::Rgba16 => {
                    "alpha channel unsupported".to_string()
                }
                c => format!(
                    "unsupported bit depth: {} bits per channel ({c:?}); only 8-bit is accepted",
                    c.bits_per_pixel() / u16::from(c.channel_count())
                ),
            }));
        }
    };
    Image::new(
        height,
        width,
        channels,
        bytes.into_iter().map(|b| f64::from(b) / 255.0).collect(),
    )
}

/// Writes an 8-bit PNG, PGM or PPM depending on the file extension.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let color = match img.channels {
        1 => ExtendedColorType::L8,
        _ => ExtendedColorType::Rgb8,
    };
    image::save_buffer(
        path,
        &img.to_bytes(),
        img.width as u32,
        img.height as u32,
        color,
    )
    .map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ChannelStats {
    pub fn range(&self, channel: usize) -> f64 {
        self.max[channel] - self.min[channel]
    }
}

/// Location of the per-channel extrema as flat indices into `Image::data`.
/// Ties resolve to the lowest index.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ChannelExtrema {
    pub argmin: Vec<usize>,
    pub argmax: Vec<usize>,
}

pub(crate) fn channel_extrema(img: &Image) -> ChannelExtrema {
    let c = img.channels;
    let mut argmin: Vec<usize> = (0..c).collect();
    let mut argmax: Vec<usize> = (0..c).collect();
    for (i, &v) in img.data.iter().enumerate() {
        let ch = i % c;
        if v < img.data[argmin[ch]] {
            argmin[ch] = i;
        }
        if v > img.data[argmax[ch]] {
            argmax[ch] = i;
        }
    }
    ChannelExtrema { argmin, argmax }
}

pub fn channel_stats(img: &Image) -> ChannelStats {
    let ext = channel_extrema(img);
    ChannelStats {
        min: ext.argmin.iter().map(|&i| img.data[i]).collect(),
        max: ext.argmax.iter().map(|&i| img.data[i]).collect(),
    }
}

/// Per-channel histogram stretch to `[0, 1]`.
///
/// A channel whose range is below [`RANGE_EPSILON`] carries no contrast and
/// maps to zeros.
pub fn normalize(img: &Image) -> Image {
    let stats = channel_stats(img);
    let c = img.channels;
    let data = img
        .data
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let ch = i % c;
            let range = stats.range(ch);
            if range < RANGE_EPSILON {
                0.0
            } else {
                (v - stats.min[ch]) / range
            }
        })
        .collect();
    img.with_data(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(data: &[f64]) -> Image {
        Image::new(1, data.len(), 1, data.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(Image::new(0, 2, 1, vec![]).is_err());
        assert!(Image::new(1, 1, 2, vec![0.0, 0.0]).is_err());
        assert!(Image::new(1, 2, 1, vec![0.0]).is_err());
        assert!(Image::new(1, 1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn quantization_rule() {
        let img = gray(&[0.0, 1.0, 0.5, -0.2, 1.7]);
        assert_eq!(img.to_bytes(), vec![0, 255, 128, 0, 255]);
    }

    #[test]
    fn stats_per_channel() {
        let img = gray(&[0.2, 0.5, 0.8]);
        let s = channel_stats(&img);
        assert_eq!((s.min[0], s.max[0]), (0.2, 0.8));

        let s = channel_stats(&gray(&[0.4, 0.4, 0.4]));
        assert_eq!((s.min[0], s.max[0]), (0.4, 0.4));

        let rgb = Image::new(1, 2, 3, vec![0.0, 0.3, 0.5, 1.0, 0.3, 0.7]).unwrap();
        let s = channel_stats(&rgb);
        assert_eq!(s.min, vec![0.0, 0.3, 0.5]);
        assert_eq!(s.max, vec![1.0, 0.3, 0.7]);
    }

    #[test]
    fn extrema_ties_take_lowest_index() {
        let ext = channel_extrema(&gray(&[0.5, 0.1, 0.9, 0.1, 0.9]));
        assert_eq!(ext.argmin, vec![1]);
        assert_eq!(ext.argmax, vec![2]);
    }

    #[test]
    fn normalize_stretches_and_handles_constant() {
        let n = normalize(&gray(&[0.2, 0.5, 0.8]));
        let expected = [0.0, 0.5, 1.0];
        for (a, b) in n.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
        assert_eq!(normalize(&gray(&[0.4, 0.4])).data(), &[0.0, 0.0]);
    }

    #[test]
    fn normalize_mixed_degenerate_channels() {
        let rgb = Image::new(1, 2, 3, vec![0.0, 0.3, 0.2, 1.0, 0.3, 0.6]).unwrap();
        let n = normalize(&rgb);
        assert_eq!(n.data(), &[0.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    }
}
