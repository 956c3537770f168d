#![allow(dead_code)]

use lutfuse::{ImagePlane, Lut3d, LutBank, Rational64, WeightMap};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cells drawn slightly beyond [0, 1] so nothing relies on range.
pub fn random_bank(rng: &mut ChaCha8Rng, t: usize, m: usize, n: usize) -> LutBank<f64> {
    let luts = (0..t * m)
        .map(|_| {
            let values = (0..n * n * n * 3).map(|_| rng.gen_range(-0.2..1.2)).collect();
            Lut3d::from_values(n, values).unwrap()
        })
        .collect();
    LutBank::from_luts(t, m, luts).unwrap()
}

pub fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

pub fn random_weights(rng: &mut ChaCha8Rng, t: usize, m: usize, h: usize, w: usize) -> WeightMap<f64> {
    let omega = random_simplex(rng, t);
    let alpha = (0..h * w).flat_map(|_| random_simplex(rng, m)).collect();
    WeightMap::new(omega, h, w, m, alpha).unwrap()
}

pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ImagePlane<f64> {
    ImagePlane::from_fn(h, w, |_, _| [rng.gen(), rng.gen(), rng.gen()])
}

fn ratio(num: i64, den: i64) -> Rational64 {
    Rational64::new(num, den)
}

fn rational_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<Rational64> {
    let raw: Vec<i64> = (0..k).map(|_| rng.gen_range(1..6)).collect();
    let s: i64 = raw.iter().sum();
    raw.iter().map(|&v| ratio(v, s)).collect()
}

/// A random instance with small denominators, so exact arithmetic stays in range.
pub fn rational_instance(
    rng: &mut ChaCha8Rng,
    t: usize,
    m: usize,
    n: usize,
    h: usize,
    w: usize,
) -> (LutBank<Rational64>, WeightMap<Rational64>, ImagePlane<Rational64>) {
    let luts = (0..t * m)
        .map(|_| {
            let values = (0..n * n * n * 3).map(|_| ratio(rng.gen_range(-4..20), 16)).collect();
            Lut3d::from_values(n, values).unwrap()
        })
        .collect();
    let bank = LutBank::from_luts(t, m, luts).unwrap();
    let omega = rational_simplex(rng, t);
    let alpha = (0..h * w).flat_map(|_| rational_simplex(rng, m)).collect();
    let weights = WeightMap::new(omega, h, w, m, alpha).unwrap();
    let image = ImagePlane::from_fn(h, w, |_, _| [0; 3].map(|_| ratio(rng.gen_range(0..=32), 32)));
    (bank, weights, image)
}
