#![allow(dead_code)]

pub mod invariants;

use std::f64::consts::TAU;

use diver_core::hydrooptic::degrade;
use diver_core::imgcore::{DepthMap, ImagePlanar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CASES: usize = 1000;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImagePlanar<f64> {
    ImagePlanar::from_fn(w, h, |_, _| [rng.gen(), rng.gen(), rng.gen()])
}

/// Random image with values drawn from `[lo, hi)`.
pub fn random_image_in(
    rng: &mut ChaCha8Rng,
    w: usize,
    h: usize,
    lo: f64,
    hi: f64,
) -> ImagePlanar<f64> {
    ImagePlanar::from_fn(w, h, |_, _| {
        [
            rng.gen_range(lo..hi),
            rng.gen_range(lo..hi),
            rng.gen_range(lo..hi),
        ]
    })
}

pub fn random_depth(rng: &mut ChaCha8Rng, w: usize, h: usize) -> DepthMap<f64> {
    DepthMap::from_fn(w, h, |_, _| rng.gen_range(0.0..5.0)).unwrap()
}

/// Random spatial permutation of pixel indices.
pub fn permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.gen_range(0..=i));
    }
    p
}

pub fn permute(img: &ImagePlanar<f64>, perm: &[usize]) -> ImagePlanar<f64> {
    let mut out = img.clone();
    for (dst, &src) in perm.iter().enumerate() {
        out.set_pixel(dst, img.pixel(src));
    }
    out
}

/// Smooth 64x64 pattern where every column passes through a dark trough.
pub fn clean_fixture() -> ImagePlanar<f64> {
    ImagePlanar::from_fn(64, 64, |x, y| {
        let (fx, fy) = (x as f64 / 63.0, y as f64 / 63.0);
        [
            0.5 + 0.45 * (TAU * 2.0 * fy + 3.0 * fx).sin(),
            0.5 + 0.45 * (TAU * 2.0 * fy + 1.0 + 2.0 * fx).sin(),
            0.5 + 0.45 * (TAU * 2.0 * fy + 2.0 + fx).sin(),
        ]
    })
}

/// Depth growing linearly from 0 to 3 across the columns.
pub fn ramp_depth() -> DepthMap<f64> {
    DepthMap::from_fn(64, 64, |x, _| 3.0 * x as f64 / 63.0).unwrap()
}

pub const ROUNDTRIP_BETA: [f64; 3] = [0.6, 0.3, 0.2];
pub const ROUNDTRIP_BINF: [f64; 3] = [0.1, 0.2, 0.3];

/// `(clean, degraded, depth)` for the restoration round trip.
pub fn roundtrip_fixture() -> (ImagePlanar<f64>, ImagePlanar<f64>, DepthMap<f64>) {
    let clean = clean_fixture();
    let depth = ramp_depth();
    let hazy = degrade(&clean, &depth, ROUNDTRIP_BETA, ROUNDTRIP_BINF).unwrap();
    (clean, hazy, depth)
}

/// Green-tinted, washed-out scene: strong red loss and a green veil over a
/// diagonal depth ramp.
pub fn green_cast_fixture() -> (ImagePlanar<f64>, DepthMap<f64>) {
    let depth = DepthMap::from_fn(64, 64, |x, y| 1.0 + 2.0 * (x + y) as f64 / 126.0).unwrap();
    let img = degrade(
        &clean_fixture(),
        &depth,
        [0.7, 0.15, 0.35],
        [0.1, 0.45, 0.3],
    )
    .unwrap();
    (img, depth)
}

/// Ten small images alternating between well-lit and red-starved scenes.
pub fn folder_images() -> Vec<ImagePlanar<f64>> {
    (0..10)
        .map(|k| {
            let mut r = rng(100 + k as u64);
            let phase: f64 = r.gen_range(0.0..TAU);
            let red_scale = if k % 2 == 0 { 1.0 } else { 0.08 };
            ImagePlanar::from_fn(24, 20, |x, y| {
                let t = (x as f64 * 0.4 + y as f64 * 0.25 + phase).sin();
                [
                    (0.35 + 0.25 * t) * red_scale,
                    0.45 + 0.2 * (t * 1.7).cos(),
                    0.5 + 0.15 * (x as f64 / 23.0),
                ]
            })
        })
        .collect()
}

pub fn max_abs_diff(a: &ImagePlanar<f64>, b: &ImagePlanar<f64>) -> f64 {
    (0..3)
        .flat_map(|c| {
            a.plane(c)
                .iter()
                .zip(b.plane(c))
                .map(|(x, y)| (x - y).abs())
        })
        .fold(0.0, f64::max)
}

/// `img` plus independent uniform noise from `[lo, hi)` per sample, clamped to `[0, 1]`.
pub fn add_noise(
    rng: &mut ChaCha8Rng,
    img: &ImagePlanar<f64>,
    lo: f64,
    hi: f64,
) -> ImagePlanar<f64> {
    let mut out = img.clone();
    for c in 0..3 {
        for v in out.plane_mut(c) {
            *v = (*v + rng.gen_range(lo..hi)).clamp(0.0, 1.0);
        }
    }
    out
}
