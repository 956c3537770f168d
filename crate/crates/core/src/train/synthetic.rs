//! A synthetic pair whose correct mapping depends on pixel position: the
//! target applies gamma 0.45 on the left half and gamma 2.2 on the right.
//! One global LUT cannot fit both halves; two blended by position can.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::AdamConfig;
use super::metrics::psnr;
use super::trainer::{TrainConfig, Trainer};
use crate::error::Result;
use crate::image::ImagePlane;
use crate::losses::LossWeights;
use crate::model::{Model, ModelConfig, PredictorKind};

pub const LEFT_GAMMA: f64 = 0.45;
pub const RIGHT_GAMMA: f64 = 2.2;

/// Uniform random colors and the two-zone gamma target, `size×size`. The
/// right half repeats the colors of the left half, so every color appears
/// with both target curves.
pub fn two_zone_pair(size: usize, seed: u64) -> (ImagePlane<f32>, ImagePlane<f32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = size / 2;
    let left: Vec<[f32; 3]> = (0..size * half).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    let input = ImagePlane::from_fn(size, size, |y, x| {
        let lx = if x < half { x } else { (x - half).min(half.saturating_sub(1)) };
        left[y * half + lx]
    });
    let target = ImagePlane::from_fn(size, size, |y, x| {
        let g = if x < size / 2 { LEFT_GAMMA } else { RIGHT_GAMMA };
        input.pixel(y, x).map(|v| (v as f64).powf(g) as f32)
    });
    (input, target)
}

/// Data terms only. The summed regularizers at their default weights
/// outweigh a mean-squared error on a single small pair.
pub fn synthetic_loss_weights() -> LossWeights {
    LossWeights {
        mse: 1.0,
        color: 0.005,
        ..LossWeights::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub size: usize,
    pub scenarios: usize,
    pub categories: usize,
    pub n_bins: usize,
    pub grid_size: usize,
    pub steps: u64,
    /// Peak learning rate; the cosine schedule spans the whole run.
    pub lr: f64,
    pub seed: u64,
    pub loss_weights: LossWeights,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            size: 128,
            scenarios: 1,
            categories: 2,
            n_bins: 17,
            grid_size: 64,
            steps: 2000,
            lr: 2e-2,
            seed: 0,
            loss_weights: synthetic_loss_weights(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticRun {
    pub model: Model<f32>,
    pub final_psnr: f64,
    /// `(step, psnr)` samples taken every `steps / 20` steps.
    pub trace: Vec<(u64, f64)>,
}

/// Trains a grid-predictor model on [`two_zone_pair`].
pub fn run_two_zone(cfg: &SyntheticConfig) -> Result<SyntheticRun> {
    let (input, target) = two_zone_pair(cfg.size, cfg.seed);
    let config = TrainConfig {
        epochs: 1,
        lr_amplitude: cfg.lr,
        lr_period_epochs: 1,
        adam: AdamConfig::default(),
        seed: cfg.seed,
        loss_weights: cfg.loss_weights,
        model: ModelConfig {
            scenarios: cfg.scenarios,
            categories: cfg.categories,
            n_bins: cfg.n_bins,
            predictor: PredictorKind::Grid,
            conv_arch: None,
            grid_size: cfg.grid_size,
            category_spread: crate::model::DEFAULT_CATEGORY_SPREAD,
            seed: cfg.seed,
        },
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::<f32>::new(config)?;
    let every = (cfg.steps / 20).max(1);
    let mut trace = Vec::new();
    for s in 0..cfg.steps {
        let g = trainer.train_step(&input, &target, cfg.steps, None)?;
        if s % every == 0 {
            trace.push((s, psnr(&g.output, &target)?));
        }
    }
    let out = trainer.model.enhance(&input)?.output;
    let final_psnr = psnr(&out, &target)?;
    trace.push((cfg.steps, final_psnr));
    Ok(SyntheticRun {
        model: trainer.model,
        final_psnr,
        trace,
    })
}
