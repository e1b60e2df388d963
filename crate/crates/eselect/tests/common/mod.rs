//! Synthetic forecast tables for integration tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use eselect::ingest::write_dataset;
use eselect::ConfigLayer;
use eselect_core::ForecastTriple;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` steps of horizon `h`: a daily-shaped load curve, P accurate in the
/// first and last thirds, Q accurate in the middle third.
pub fn synthetic(n: usize, h: usize, seed: u64) -> Vec<ForecastTriple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let load = |s: usize| 1000.0 + 300.0 * (2.0 * std::f64::consts::PI * s as f64 / 96.0).sin();
    let truth: Vec<f64> = (0..n + h + 1).map(|s| load(s) + rng.gen_range(-40.0..40.0)).collect();
    (1..=n)
        .map(|t| {
            let y: Vec<f64> = (0..h).map(|k| truth[t + k]).collect();
            let p_good = !(n / 3..2 * n / 3).contains(&t);
            let (sp, sq) = if p_good { (30.0, 90.0) } else { (90.0, 30.0) };
            let p = y.iter().map(|v| v + rng.gen_range(-sp..sp)).collect();
            let q = y.iter().map(|v| v + rng.gen_range(-sq..sq)).collect();
            ForecastTriple::new(t as u64, p, q, y).unwrap()
        })
        .collect()
}

pub fn write(dir: &Path, name: &str, triples: &[ForecastTriple]) -> PathBuf {
    let path = dir.join(name);
    write_dataset(std::fs::File::create(&path).unwrap(), triples).unwrap();
    path
}

/// Small-scale layer: calibration 1d, lag 2h.
pub fn layer(input: &Path, out: &Path) -> ConfigLayer {
    ConfigLayer {
        input: Some(input.to_path_buf()),
        calibration: Some("1d".into()),
        lag: Some("2h".into()),
        seed: Some(11),
        output_dir: Some(out.to_path_buf()),
        ..Default::default()
    }
}

/// Every file in `dir` with its bytes, sorted by name.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}
