#![allow(dead_code)]

use nonneg_core::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize, lo: f64, hi: f64) -> Image {
    let data = (0..h * w * c).map(|_| rng.gen_range(lo..=hi)).collect();
    Image::new(h, w, c, data).unwrap()
}

pub fn gray(data: &[f64]) -> Image {
    Image::new(1, data.len(), 1, data.to_vec()).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
