//! A LUT bank paired with its weight predictor, and the inference pipeline.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::apply::apply_with_lowres_alpha;
use crate::error::{invalid_arg, Result};
use crate::grad::upsample_bilinear;
use crate::image::ImagePlane;
use crate::imageio::resize_bilinear;
use crate::lut::{Lut3d, LutBank, DEFAULT_BINS, DEFAULT_CATEGORIES, DEFAULT_SCENARIOS};
use crate::predictor::{ConvArch, ConvPredictor, GridPredictor, HeadInit, Predictor, PredictorOutput};
use crate::scalar::Real;
use crate::weights::WeightMap;

pub const DEFAULT_CATEGORY_SPREAD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictorKind {
    #[default]
    Conv,
    Grid,
}

/// Shape and initialization of a fresh model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub scenarios: usize,
    pub categories: usize,
    pub n_bins: usize,
    pub predictor: PredictorKind,
    /// Overrides the standard network (conv predictor only).
    pub conv_arch: Option<ConvArch>,
    /// Side of the learnable grid (grid predictor only).
    pub grid_size: usize,
    /// Amplitude of the zero-sum category perturbation applied to fresh
    /// LUTs (see [`Model::fresh`]); 0 leaves every LUT an exact identity.
    pub category_spread: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            scenarios: DEFAULT_SCENARIOS,
            categories: DEFAULT_CATEGORIES,
            n_bins: DEFAULT_BINS,
            predictor: PredictorKind::Conv,
            conv_arch: None,
            grid_size: GridPredictor::<f32>::DEFAULT_ALPHA_SIZE,
            category_spread: DEFAULT_CATEGORY_SPREAD,
            seed: 0,
        }
    }
}

/// Output of [`Model::enhance`] with the wall-clock split between the
/// predictor (including its input resize) and the fused interpolation.
#[derive(Debug, Clone)]
pub struct Enhanced<S> {
    pub output: ImagePlane<S>,
    pub weights: PredictorOutput<S>,
    pub predictor_time: Duration,
    pub interp_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<S> {
    pub bank: LutBank<S>,
    pub predictor: Predictor<S>,
}

impl<S: Real> Model<S> {
    /// A model that maps every image to itself: zero-initialized heads give
    /// uniform weights, and the LUTs of each scenario average to the identity.
    ///
    /// With `M > 1`, LUT `(t, m)` is `identity + c[t][m] · x(1 - x)` per
    /// channel with `Σ_m c[t][m] = 0`. Identical LUTs under uniform weights
    /// would receive identical gradients forever; the zero-sum offsets break
    /// that symmetry without changing the initial output.
    pub fn fresh(config: &ModelConfig) -> Result<Self> {
        let mut bank = LutBank::identity(config.scenarios, config.categories, config.n_bins)?;
        if !(config.category_spread >= 0.0 && config.category_spread < 0.5) {
            return Err(invalid_arg!("category spread must lie in [0, 0.5)"));
        }
        if config.categories > 1 && config.category_spread > 0.0 {
            spread_categories(&mut bank, config.category_spread, config.seed);
        }
        let predictor = match config.predictor {
            PredictorKind::Conv => {
                let arch = config
                    .conv_arch
                    .unwrap_or_else(|| ConvArch::standard(config.scenarios, config.categories));
                Predictor::Conv(ConvPredictor::new(arch, config.seed, HeadInit::Zero)?)
            }
            PredictorKind::Grid => Predictor::Grid(GridPredictor::new(
                config.scenarios,
                config.categories,
                config.grid_size,
            )?),
        };
        Self::new(bank, predictor)
    }

    pub fn new(bank: LutBank<S>, predictor: Predictor<S>) -> Result<Self> {
        if bank.scenarios() != predictor.scenarios() || bank.categories() != predictor.categories() {
            return Err(invalid_arg!(
                "bank is T={} M={} but the predictor is T={} M={}",
                bank.scenarios(),
                bank.categories(),
                predictor.scenarios(),
                predictor.categories()
            ));
        }
        Ok(Self { bank, predictor })
    }

    /// The image the predictor sees: `image` resized to the network input.
    pub fn predictor_input(&self, image: &ImagePlane<S>) -> Result<ImagePlane<S>> {
        match self.predictor.input_size() {
            Some(s) => resize_bilinear(image, s, s),
            None => Ok(image.clone()),
        }
    }

    pub fn predict_weights(&self, image: &ImagePlane<S>) -> Result<PredictorOutput<S>> {
        self.predictor.predict(&self.predictor_input(image)?)
    }

    /// Full-resolution weights for `image`.
    pub fn weight_map(&self, image: &ImagePlane<S>) -> Result<WeightMap<S>> {
        let out = self.predict_weights(image)?;
        full_weights(&out, self.bank.categories(), image.height(), image.width())
    }

    pub fn enhance(&self, image: &ImagePlane<S>) -> Result<Enhanced<S>> {
        if image.height() == 0 || image.width() == 0 {
            return Err(invalid_arg!("image has a zero dimension"));
        }
        let start = Instant::now();
        let weights = self.predict_weights(image)?;
        let predictor_time = start.elapsed();
        let start = Instant::now();
        let a = weights.alpha_size;
        let output = apply_with_lowres_alpha(&self.bank, &weights.omega, &weights.alpha, a, a, image)?;
        let interp_time = start.elapsed();
        Ok(Enhanced {
            output,
            weights,
            predictor_time,
            interp_time,
        })
    }

    pub fn all_finite(&self) -> bool {
        self.bank.all_finite() && self.predictor.params().iter().all(|v| v.is_finite())
    }

    pub fn cast<D: Real>(&self) -> Model<D> {
        Model {
            bank: self.bank.cast(),
            predictor: self.predictor.cast(),
        }
    }
}

fn spread_categories<S: Real>(bank: &mut LutBank<S>, spread: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1075);
    let (t_count, m_count, n) = (bank.scenarios(), bank.categories(), bank.n_bins());
    let scale = 1.0 / (n - 1) as f64;
    for t in 0..t_count {
        let mut c: Vec<[f64; 3]> = (0..m_count)
            .map(|_| [0; 3].map(|_| rng.gen_range(-spread..spread)))
            .collect();
        for ch in 0..3 {
            let mean = c.iter().map(|v| v[ch]).sum::<f64>() / m_count as f64;
            c.iter_mut().for_each(|v| v[ch] -= mean);
        }
        for (m, cm) in c.iter().enumerate() {
            let lut = bank.lut_mut(t, m);
            *lut = Lut3d::from_fn(n, |i, j, k| {
                let idx = [i, j, k];
                [0, 1, 2].map(|ch| {
                    let x = idx[ch] as f64 * scale;
                    S::lit(x + cm[ch] * x * (1.0 - x))
                })
            })
            .expect("valid size");
        }
    }
}

/// Upsamples a predictor's category map to `height×width`.
pub fn full_weights<S: Real>(
    out: &PredictorOutput<S>,
    categories: usize,
    height: usize,
    width: usize,
) -> Result<WeightMap<S>> {
    let a = out.alpha_size;
    let alpha = upsample_bilinear(&out.alpha, a, a, categories, height, width)?;
    WeightMap::new(out.omega.clone(), height, width, categories, alpha)
}
