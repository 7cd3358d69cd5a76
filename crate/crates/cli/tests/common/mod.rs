#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nonneg_core::{save_image, Image};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn nonneg() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nonneg"));
    cmd.env_remove(nonneg_cli::THREADS_ENV);
    cmd
}

pub fn run(args: &[&str]) -> Output {
    nonneg().args(args).output().expect("binary runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn constant(h: usize, w: usize, c: usize, v: f64) -> Image {
    Image::filled(h, w, c, v).unwrap()
}

/// Random image whose intensities are exact 8-bit levels, so it survives a
/// save/load cycle unchanged.
pub fn random_levels(seed: u64, h: usize, w: usize, c: usize, lo: u8, hi: u8) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..h * w * c)
        .map(|_| f64::from(rng.gen_range(lo..=hi)) / 255.0)
        .collect();
    Image::new(h, w, c, data).unwrap()
}

pub fn write(dir: &Path, name: &str, img: &Image) -> PathBuf {
    let path = dir.join(name);
    save_image(img, &path).unwrap();
    path
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
