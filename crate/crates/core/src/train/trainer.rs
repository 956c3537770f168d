//! The training loop, per-epoch metrics and resumable checkpoints.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{Adam, AdamConfig};
use super::dataset::{Dataset, Pair};
use super::metrics::{format_db, psnr, ssim};
use super::schedule::cosine_lr;
use super::step::{loss_and_gradients, StepGradients};
use crate::error::{invalid_arg, Error, Result};
use crate::formats::{decode_bundle, encode_bundle};
use crate::image::ImagePlane;
use crate::losses::{LossWeights, PerceptualTerm};
use crate::model::{Model, ModelConfig};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: u64,
    /// Pairs per optimizer step; gradients are averaged over the batch.
    pub batch_size: usize,
    pub lr_amplitude: f64,
    pub lr_period_epochs: u64,
    pub adam: AdamConfig,
    /// Seeds the data order.
    pub seed: u64,
    pub loss_weights: LossWeights,
    pub model: ModelConfig,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 400,
            batch_size: 1,
            lr_amplitude: 2e-4,
            lr_period_epochs: 20,
            adam: AdamConfig::default(),
            seed: 0,
            loss_weights: LossWeights::default(),
            model: ModelConfig::default(),
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(invalid_arg!("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid_arg!("batch size must be >= 1"));
        }
        if !(self.lr_amplitude > 0.0 && self.lr_amplitude.is_finite()) {
            return Err(invalid_arg!("learning rate must be positive, got {}", self.lr_amplitude));
        }
        if self.lr_period_epochs == 0 {
            return Err(invalid_arg!("learning-rate period must be >= 1 epoch"));
        }
        self.loss_weights.validate()
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: u64,
    pub lr: f64,
    pub total: f64,
    pub mse: f64,
    pub smooth: f64,
    pub mono: f64,
    pub color: f64,
    pub val_psnr: f64,
    pub val_ssim: f64,
    pub wall_ms: f64,
}

impl EpochMetrics {
    pub const HEADER: &'static str =
        "epoch\tlr\tL_total\tL_r\tL_s\tL_m\tL_c\tval_PSNR\tval_SSIM\twall_ms";

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{:.9e}\t{:.9e}\t{:.9e}\t{:.9e}\t{:.9e}\t{:.9e}\t{}\t{:.6}\t{:.1}",
            self.epoch,
            self.lr,
            self.total,
            self.mse,
            self.smooth,
            self.mono,
            self.color,
            format_db(self.val_psnr),
            self.val_ssim,
            self.wall_ms
        )
    }
}

/// Optimizer state around a model.
#[derive(Debug, Clone)]
pub struct Trainer<S> {
    pub config: TrainConfig,
    pub model: Model<S>,
    adam: Adam<S>,
    epoch: u64,
    step: u64,
    rng: ChaCha8Rng,
}

fn param_count<S: Real>(model: &Model<S>) -> usize {
    model.bank.luts().len() * model.bank.lut_len() + model.predictor.params().len()
}

impl<S: Real> Trainer<S> {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        Self::with_model(config, Model::fresh(&config.model)?)
    }

    pub fn with_model(config: TrainConfig, model: Model<S>) -> Result<Self> {
        config.validate()?;
        let adam = Adam::new(config.adam, param_count(&model));
        Ok(Self {
            config,
            model,
            adam,
            epoch: 0,
            step: 0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        })
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn learning_rate(&self, steps_per_epoch: u64) -> f64 {
        cosine_lr(self.step, steps_per_epoch, self.config.lr_amplitude, self.config.lr_period_epochs)
    }

    fn apply(&mut self, lr: f64, d_luts: &[Vec<S>], d_params: &[S]) -> Result<()> {
        let Model { bank, predictor } = &mut self.model;
        let mut parts: Vec<(&mut [S], &[S])> = bank
            .luts_mut()
            .iter_mut()
            .zip(d_luts)
            .map(|(lut, g)| (lut.values_mut(), g.as_slice()))
            .collect();
        parts.push((predictor.params_mut(), d_params));
        self.adam.step(lr, &mut parts)?;
        self.step += 1;
        if !self.model.all_finite() {
            return Err(Error::NonFinite(format!("parameters diverged at step {}", self.step)));
        }
        Ok(())
    }

    /// One optimizer step on a single pair.
    pub fn train_step(
        &mut self,
        input: &ImagePlane<S>,
        target: &ImagePlane<S>,
        steps_per_epoch: u64,
        perceptual: Option<&dyn PerceptualTerm<S>>,
    ) -> Result<StepGradients<S>> {
        let g = loss_and_gradients(&self.model, input, target, &self.config.loss_weights, perceptual)?;
        if !g.value.is_finite() {
            return Err(Error::NonFinite(format!("loss is {:?} at step {}", g.value, self.step)));
        }
        let lr = self.learning_rate(steps_per_epoch);
        self.apply(lr, &g.d_luts, &g.d_params)?;
        Ok(g)
    }

    /// Mean PSNR and SSIM of the current model over `pairs`. SSIM is NaN
    /// when an image is smaller than the SSIM window.
    pub fn evaluate(&self, pairs: &[Pair]) -> Result<(f64, f64)> {
        if pairs.is_empty() {
            return Ok((f64::NAN, f64::NAN));
        }
        let (mut p_sum, mut s_sum) = (0.0, 0.0);
        for pair in pairs {
            let input: ImagePlane<S> = pair.input.cast();
            let target: ImagePlane<S> = pair.target.cast();
            let out = self.model.enhance(&input)?.output;
            p_sum += psnr(&out, &target)?;
            s_sum += ssim(&out, &target).unwrap_or(f64::NAN);
        }
        let n = pairs.len() as f64;
        Ok((p_sum / n, s_sum / n))
    }

    /// One pass over the training pairs followed by evaluation.
    pub fn run_epoch(
        &mut self,
        data: &Dataset,
        perceptual: Option<&dyn PerceptualTerm<S>>,
    ) -> Result<EpochMetrics> {
        if data.train.is_empty() {
            return Err(Error::Data("no training pairs".into()));
        }
        let start = Instant::now();
        let mut order: Vec<usize> = (0..data.train.len()).collect();
        if self.config.shuffle {
            order.shuffle(&mut self.rng);
        }
        let batch = self.config.batch_size;
        let steps_per_epoch = order.len().div_ceil(batch) as u64;
        let mut sums = [0.0f64; 5];
        let mut lr = 0.0;
        for chunk in order.chunks(batch) {
            let mut d_luts: Vec<Vec<S>> = Vec::new();
            let mut d_params: Vec<S> = Vec::new();
            for &i in chunk {
                let pair = &data.train[i];
                let g = loss_and_gradients(
                    &self.model,
                    &pair.input.cast(),
                    &pair.target.cast(),
                    &self.config.loss_weights,
                    perceptual,
                )?;
                if !g.value.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "loss is {:?} on {} at step {}",
                        g.value, pair.name, self.step
                    )));
                }
                let c = g.components;
                for (s, v) in sums.iter_mut().zip([g.value, c.mse, c.smooth, c.mono, c.color]) {
                    *s += v.to_f64_lossy();
                }
                if d_luts.is_empty() {
                    d_luts = g.d_luts;
                    d_params = g.d_params;
                } else {
                    for (acc, new) in d_luts.iter_mut().zip(&g.d_luts) {
                        acc.iter_mut().zip(new).for_each(|(a, &b)| *a = *a + b);
                    }
                    d_params.iter_mut().zip(&g.d_params).for_each(|(a, &b)| *a = *a + b);
                }
            }
            if chunk.len() > 1 {
                let inv = S::one() / S::from_index(chunk.len());
                d_luts.iter_mut().flatten().for_each(|v| *v = *v * inv);
                d_params.iter_mut().for_each(|v| *v = *v * inv);
            }
            lr = self.learning_rate(steps_per_epoch);
            self.apply(lr, &d_luts, &d_params)?;
        }
        self.epoch += 1;
        let (val_psnr, val_ssim) = self.evaluate(data.eval_pairs())?;
        let n = order.len() as f64;
        Ok(EpochMetrics {
            epoch: self.epoch,
            lr,
            total: sums[0] / n,
            mse: sums[1] / n,
            smooth: sums[2] / n,
            mono: sums[3] / n,
            color: sums[4] / n,
            val_psnr,
            val_ssim,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"SLCK";
const CHECKPOINT_VERSION: u16 = 1;

impl Trainer<f32> {
    /// Serializes the model, optimizer moments, counters and data-order RNG.
    ///
    /// ```text
    /// "SLCK" version:u16 epoch:u64 step:u64 rng_seed:[u8;32] rng_stream:u64
    /// rng_word_pos:u128 adam_t:u64 len:u64 m:len×f32 v:len×f32
    /// bundle_len:u64 bundle  crc32:u32
    /// ```
    pub fn encode_checkpoint(&self) -> Result<Vec<u8>> {
        let bundle = encode_bundle(&self.model)?;
        let (m, v) = self.adam.moments();
        let mut out = Vec::with_capacity(96 + 8 * m.len() + bundle.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.rng.get_seed());
        out.extend_from_slice(&self.rng.get_stream().to_le_bytes());
        out.extend_from_slice(&self.rng.get_word_pos().to_le_bytes());
        out.extend_from_slice(&self.adam.steps().to_le_bytes());
        out.extend_from_slice(&(m.len() as u64).to_le_bytes());
        for x in m.iter().chain(v) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.extend_from_slice(&(bundle.len() as u64).to_le_bytes());
        out.extend_from_slice(&bundle);
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    /// Restores a trainer; `config` supplies the hyper-parameters.
    pub fn decode_checkpoint(config: TrainConfig, bytes: &[u8]) -> Result<Self> {
        config.validate()?;
        if bytes.len() < 4 + 4 {
            return Err(Error::Format("checkpoint is truncated".into()));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let end = pos
                .checked_add(n)
                .filter(|&e| e <= body.len())
                .ok_or_else(|| Error::Format("checkpoint is truncated".into()))?;
            let s = &body[pos..end];
            pos = end;
            Ok(s)
        };
        if take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let u64_at = |b: &[u8]| u64::from_le_bytes(b.try_into().unwrap());
        let epoch = u64_at(take(8)?);
        let step = u64_at(take(8)?);
        let seed: [u8; 32] = take(32)?.try_into().unwrap();
        let stream = u64_at(take(8)?);
        let word_pos = u128::from_le_bytes(take(16)?.try_into().unwrap());
        let adam_t = u64_at(take(8)?);
        let len = usize::try_from(u64_at(take(8)?)).map_err(|_| Error::Format("length overflow".into()))?;
        let floats = |b: &[u8]| -> Vec<f32> {
            b.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()
        };
        let bytes_len = len.checked_mul(4).ok_or_else(|| Error::Format("length overflow".into()))?;
        let m = floats(take(bytes_len)?);
        let v = floats(take(bytes_len)?);
        let blen = usize::try_from(u64_at(take(8)?)).map_err(|_| Error::Format("length overflow".into()))?;
        let model = decode_bundle(take(blen)?)?;
        if pos != body.len() {
            return Err(Error::Format("trailing bytes in checkpoint".into()));
        }
        if len != param_count(&model) {
            return Err(Error::Format("optimizer state does not match the model".into()));
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        Ok(Self {
            config,
            model,
            adam: Adam::from_state(config.adam, m, v, adam_t)?,
            epoch,
            step,
            rng,
        })
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode_checkpoint()?).map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(config: TrainConfig, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::decode_checkpoint(config, &std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

