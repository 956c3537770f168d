//! Convolutional encoder-decoder with a scenario head and a category-map head.
//!
//! ```text
//! input S×S×3
//!  enc1  conv3x3 s1 → w0, leaky      S
//!  enc2  conv3x3 s2 → w1, leaky      S/2
//!  enc3  conv3x3 s2 → w2, leaky      S/4
//!  enc4  conv3x3 s2 → w3, leaky      S/8
//!  scenario head: global average pool(enc4) → fully connected → T logits
//!  dec1  nearest-up×2(enc4) + enc3 → conv3x3 s1 → w4, leaky   S/4
//!  dec2  conv3x3 s1 → w5, leaky                               S/4
//!  category head: conv1x1 → M logits                          S/4
//! ```
//!
//! The skip connection adds enc3 to the upsampled enc4, so `w3 == w2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::conv::{conv_backward, conv_forward, ConvSpec};
use super::{softmax_backward, softmax_in_place, PredictorOutput};
use crate::error::{invalid_arg, Error, Result};
use crate::image::ImagePlane;
use crate::scalar::Real;

/// Shape of a [`ConvPredictor`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvArch {
    pub input_size: usize,
    /// Channel widths of enc1..enc4, dec1, dec2.
    pub widths: [usize; 6],
    pub scenarios: usize,
    pub categories: usize,
    /// Negative-side slope of the leaky ReLU (0 gives a plain ReLU).
    pub slope: f64,
}

impl ConvArch {
    pub const STANDARD_INPUT: usize = 256;
    pub const STANDARD_WIDTHS: [usize; 6] = [16, 32, 64, 64, 32, 16];
    pub const STANDARD_SLOPE: f64 = 0.1;

    /// The production network: 256×256 input, α at 64×64.
    pub fn standard(scenarios: usize, categories: usize) -> Self {
        Self {
            input_size: Self::STANDARD_INPUT,
            widths: Self::STANDARD_WIDTHS,
            scenarios,
            categories,
            slope: Self::STANDARD_SLOPE,
        }
    }

    /// A small variant with uniform channel width, used for gradient checks.
    pub fn miniature(input_size: usize, width: usize, scenarios: usize, categories: usize) -> Self {
        Self {
            input_size,
            widths: [width; 6],
            scenarios,
            categories,
            slope: Self::STANDARD_SLOPE,
        }
    }

    pub fn is_standard(&self) -> bool {
        self.input_size == Self::STANDARD_INPUT
            && self.widths == Self::STANDARD_WIDTHS
            && self.slope == Self::STANDARD_SLOPE
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size < 8 || !self.input_size.is_multiple_of(8) {
            return Err(invalid_arg!(
                "predictor input size must be a positive multiple of 8, got {}",
                self.input_size
            ));
        }
        if self.widths.contains(&0) {
            return Err(invalid_arg!("predictor widths must be positive"));
        }
        if self.widths[2] != self.widths[3] {
            return Err(invalid_arg!("skip connection needs enc3 and enc4 widths to match"));
        }
        if self.scenarios == 0 || self.categories == 0 {
            return Err(invalid_arg!("predictor needs T >= 1 and M >= 1"));
        }
        if !(self.slope >= 0.0 && self.slope < 1.0) {
            return Err(invalid_arg!("leaky slope must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn alpha_size(&self) -> usize {
        self.input_size / 4
    }

    fn convs(&self) -> [ConvSpec; 7] {
        let w = self.widths;
        [
            ConvSpec::new(3, w[0], 3, 1),
            ConvSpec::new(w[0], w[1], 3, 2),
            ConvSpec::new(w[1], w[2], 3, 2),
            ConvSpec::new(w[2], w[3], 3, 2),
            ConvSpec::new(w[2], w[4], 3, 1),
            ConvSpec::new(w[4], w[5], 3, 1),
            ConvSpec::new(w[5], self.categories, 1, 1),
        ]
    }

    fn fc_len(&self) -> usize {
        self.scenarios * self.widths[3] + self.scenarios
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.convs().iter().map(ConvSpec::param_len).sum::<usize>() + self.fc_len()
    }
}

const ENC1: usize = 0;
const ENC2: usize = 1;
const ENC3: usize = 2;
const ENC4: usize = 3;
const DEC1: usize = 4;
const DEC2: usize = 5;
const HEAD: usize = 6;

/// How the two output heads start out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadInit {
    /// Zero weights and biases: uniform ω and α for any input.
    Zero,
    /// Same scheme as the hidden layers (used to exercise every gradient path).
    Random,
}

/// Activations recorded by a forward pass, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTape<S> {
    input: Vec<S>,
    pre: [Vec<S>; 6],
    post: [Vec<S>; 6],
    dec_in: Vec<S>,
    pooled: Vec<S>,
    omega: Vec<S>,
    alpha: Vec<S>,
}

/// The convolutional two-head weight predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvPredictor<S> {
    arch: ConvArch,
    params: Vec<S>,
}

impl<S: Real> ConvPredictor<S> {
    /// Kaiming-uniform hidden kernels (`±sqrt(6 / fan_in)`), zero biases;
    /// deterministic in `seed`.
    pub fn new(arch: ConvArch, seed: u64, heads: HeadInit) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(arch.param_count());
        for (i, spec) in arch.convs().iter().enumerate() {
            let random = i != HEAD || heads == HeadInit::Random;
            push_layer(&mut params, &mut rng, spec.weight_len(), spec.out_c, spec.fan_in(), random);
        }
        push_layer(
            &mut params,
            &mut rng,
            arch.scenarios * arch.widths[3],
            arch.scenarios,
            arch.widths[3],
            heads == HeadInit::Random,
        );
        debug_assert_eq!(params.len(), arch.param_count());
        Ok(Self { arch, params })
    }

    pub fn from_params(arch: ConvArch, params: Vec<S>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(invalid_arg!(
                "predictor expects {} parameters, got {}",
                arch.param_count(),
                params.len()
            ));
        }
        Ok(Self { arch, params })
    }

    pub fn arch(&self) -> &ConvArch {
        &self.arch
    }

    pub fn params(&self) -> &[S] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        &mut self.params
    }

    /// Parameter ranges of each conv layer followed by the fully connected head.
    fn layer_ranges(&self) -> ([std::ops::Range<usize>; 7], std::ops::Range<usize>) {
        let mut start = 0;
        let convs = self.arch.convs().map(|spec| {
            let r = start..start + spec.param_len();
            start = r.end;
            r
        });
        (convs, start..start + self.arch.fc_len())
    }

    fn leaky(&self, z: &[S]) -> Vec<S> {
        let slope = S::lit(self.arch.slope);
        z.iter().map(|&v| if v > S::zero() { v } else { slope * v }).collect()
    }

    /// Runs both heads on an `S×S` input.
    pub fn forward(&self, input: &ImagePlane<S>) -> Result<(PredictorOutput<S>, ForwardTape<S>)> {
        let size = self.arch.input_size;
        if input.height() != size || input.width() != size {
            return Err(invalid_arg!(
                "predictor input must be {size}x{size}, got {}x{}",
                input.height(),
                input.width()
            ));
        }
        let convs = self.arch.convs();
        let (ranges, fc_range) = self.layer_ranges();
        let p = &self.params;

        // HWC → CHW
        let plane = size * size;
        let mut chw = vec![S::zero(); 3 * plane];
        for (i, px) in input.data().chunks_exact(3).enumerate() {
            for c in 0..3 {
                chw[c * plane + i] = px[c];
            }
        }

        let dims = [size, size / 2, size / 4, size / 8, size / 4, size / 4];
        let mut pre: [Vec<S>; 6] = Default::default();
        let mut post: [Vec<S>; 6] = Default::default();
        let mut current = &chw;
        let mut in_dim = size;
        for layer in ENC1..=ENC4 {
            pre[layer] = conv_forward(&convs[layer], &p[ranges[layer].clone()], current, in_dim, in_dim);
            post[layer] = self.leaky(&pre[layer]);
            current = &post[layer];
            in_dim = dims[layer];
        }

        // scenario head
        let w3 = self.arch.widths[3];
        let d4 = dims[ENC4];
        let area = S::from_index(d4 * d4);
        let pooled: Vec<S> = post[ENC4]
            .chunks_exact(d4 * d4)
            .map(|c| c.iter().fold(S::zero(), |a, &v| a + v) / area)
            .collect();
        let fc = &p[fc_range];
        let t_count = self.arch.scenarios;
        let omega_logits: Vec<S> = (0..t_count)
            .map(|t| {
                let row = &fc[t * w3..(t + 1) * w3];
                row.iter().zip(&pooled).fold(fc[t_count * w3 + t], |a, (&w, &x)| a + w * x)
            })
            .collect();
        let mut omega = omega_logits.clone();
        softmax_in_place(&mut omega);

        // decoder
        let d3 = dims[ENC3];
        let mut dec_in = post[ENC3].clone();
        for (c, plane3) in dec_in.chunks_exact_mut(d3 * d3).enumerate() {
            let src = &post[ENC4][c * d4 * d4..(c + 1) * d4 * d4];
            for y in 0..d3 {
                for x in 0..d3 {
                    plane3[y * d3 + x] = plane3[y * d3 + x] + src[(y / 2) * d4 + x / 2];
                }
            }
        }
        pre[DEC1] = conv_forward(&convs[DEC1], &p[ranges[DEC1].clone()], &dec_in, d3, d3);
        post[DEC1] = self.leaky(&pre[DEC1]);
        pre[DEC2] = conv_forward(&convs[DEC2], &p[ranges[DEC2].clone()], &post[DEC1], d3, d3);
        post[DEC2] = self.leaky(&pre[DEC2]);
        let head = conv_forward(&convs[HEAD], &p[ranges[HEAD].clone()], &post[DEC2], d3, d3);

        // CHW → HWC logits, then per-pixel softmax
        let m = self.arch.categories;
        let area3 = d3 * d3;
        let mut alpha_logits = vec![S::zero(); area3 * m];
        for c in 0..m {
            for i in 0..area3 {
                alpha_logits[i * m + c] = head[c * area3 + i];
            }
        }
        let mut alpha = alpha_logits.clone();
        alpha.chunks_exact_mut(m).for_each(softmax_in_place);

        let tape = ForwardTape {
            input: chw,
            pre,
            post,
            dec_in,
            pooled,
            omega: omega.clone(),
            alpha: alpha.clone(),
        };
        let out = PredictorOutput {
            omega_logits,
            omega,
            alpha_logits,
            alpha,
            alpha_size: d3,
        };
        Ok((out, tape))
    }

    /// Parameter gradients for upstream gradients of the post-softmax outputs.
    pub fn backward(&self, tape: &ForwardTape<S>, d_omega: &[S], d_alpha: &[S]) -> Result<Vec<S>> {
        let size = self.arch.input_size;
        let d3 = size / 4;
        let d4 = size / 8;
        let m = self.arch.categories;
        let t_count = self.arch.scenarios;
        let w3 = self.arch.widths[3];
        if tape.input.len() != 3 * size * size || tape.alpha.len() != d3 * d3 * m {
            return Err(Error::InvalidState("forward tape does not match this network".into()));
        }
        if d_omega.len() != t_count || d_alpha.len() != d3 * d3 * m {
            return Err(invalid_arg!(
                "upstream gradients must be {t_count} and {d3}x{d3}x{m}, got {} and {}",
                d_omega.len(),
                d_alpha.len()
            ));
        }
        let convs = self.arch.convs();
        let (ranges, fc_range) = self.layer_ranges();
        let p = &self.params;
        let mut grads = vec![S::zero(); self.params.len()];
        let slope = S::lit(self.arch.slope);
        let leaky_back = |d_post: &[S], pre: &[S]| -> Vec<S> {
            d_post
                .iter()
                .zip(pre)
                .map(|(&g, &z)| if z > S::zero() { g } else { slope * g })
                .collect()
        };

        // category head
        let area3 = d3 * d3;
        let mut d_head = vec![S::zero(); m * area3];
        let mut d_logit = vec![S::zero(); m];
        for i in 0..area3 {
            softmax_backward(&tape.alpha[i * m..(i + 1) * m], &d_alpha[i * m..(i + 1) * m], &mut d_logit);
            for c in 0..m {
                d_head[c * area3 + i] = d_logit[c];
            }
        }
        let (d_dec2, g) = conv_backward(&convs[HEAD], &p[ranges[HEAD].clone()], &tape.post[DEC2], d3, d3, &d_head, true);
        grads[ranges[HEAD].clone()].copy_from_slice(&g);

        let d_pre = leaky_back(&d_dec2, &tape.pre[DEC2]);
        let (d_dec1, g) = conv_backward(&convs[DEC2], &p[ranges[DEC2].clone()], &tape.post[DEC1], d3, d3, &d_pre, true);
        grads[ranges[DEC2].clone()].copy_from_slice(&g);

        let d_pre = leaky_back(&d_dec1, &tape.pre[DEC1]);
        let (d_dec_in, g) = conv_backward(&convs[DEC1], &p[ranges[DEC1].clone()], &tape.dec_in, d3, d3, &d_pre, true);
        grads[ranges[DEC1].clone()].copy_from_slice(&g);

        // skip: dec_in = enc3 + up(enc4)
        let mut d_enc3 = d_dec_in.clone();
        let mut d_enc4 = vec![S::zero(); w3 * d4 * d4];
        for (c, plane) in d_dec_in.chunks_exact(area3).enumerate() {
            let dst = &mut d_enc4[c * d4 * d4..(c + 1) * d4 * d4];
            for y in 0..d3 {
                for x in 0..d3 {
                    let o = (y / 2) * d4 + x / 2;
                    dst[o] = dst[o] + plane[y * d3 + x];
                }
            }
        }

        // scenario head
        let mut d_omega_logits = vec![S::zero(); t_count];
        softmax_backward(&tape.omega, d_omega, &mut d_omega_logits);
        let fc = &p[fc_range.clone()];
        let mut d_fc = vec![S::zero(); fc.len()];
        let mut d_pooled = vec![S::zero(); w3];
        for t in 0..t_count {
            let g = d_omega_logits[t];
            for c in 0..w3 {
                d_fc[t * w3 + c] = g * tape.pooled[c];
                d_pooled[c] = d_pooled[c] + fc[t * w3 + c] * g;
            }
            d_fc[t_count * w3 + t] = g;
        }
        grads[fc_range].copy_from_slice(&d_fc);
        let area4 = S::from_index(d4 * d4);
        for (c, dst) in d_enc4.chunks_exact_mut(d4 * d4).enumerate() {
            let share = d_pooled[c] / area4;
            dst.iter_mut().for_each(|v| *v = *v + share);
        }

        // encoder
        let d_pre = leaky_back(&d_enc4, &tape.pre[ENC4]);
        let (d_in, g) = conv_backward(&convs[ENC4], &p[ranges[ENC4].clone()], &tape.post[ENC3], d3, d3, &d_pre, true);
        grads[ranges[ENC4].clone()].copy_from_slice(&g);
        for (a, b) in d_enc3.iter_mut().zip(&d_in) {
            *a = *a + *b;
        }

        let d_pre = leaky_back(&d_enc3, &tape.pre[ENC3]);
        let (d_enc2, g) = conv_backward(&convs[ENC3], &p[ranges[ENC3].clone()], &tape.post[ENC2], size / 2, size / 2, &d_pre, true);
        grads[ranges[ENC3].clone()].copy_from_slice(&g);

        let d_pre = leaky_back(&d_enc2, &tape.pre[ENC2]);
        let (d_enc1, g) = conv_backward(&convs[ENC2], &p[ranges[ENC2].clone()], &tape.post[ENC1], size, size, &d_pre, true);
        grads[ranges[ENC2].clone()].copy_from_slice(&g);

        let d_pre = leaky_back(&d_enc1, &tape.pre[ENC1]);
        let (_, g) = conv_backward(&convs[ENC1], &p[ranges[ENC1].clone()], &tape.input, size, size, &d_pre, false);
        grads[ranges[ENC1].clone()].copy_from_slice(&g);

        Ok(grads)
    }
}

fn push_layer<S: Real>(
    params: &mut Vec<S>,
    rng: &mut ChaCha8Rng,
    weights: usize,
    biases: usize,
    fan_in: usize,
    random: bool,
) {
    let bound = (6.0 / fan_in as f64).sqrt();
    for _ in 0..weights {
        let v = if random { rng.gen_range(-bound..bound) } else { 0.0 };
        params.push(S::lit(v));
    }
    params.extend(std::iter::repeat_n(S::zero(), biases));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_arch_shapes() {
        let arch = ConvArch::standard(3, 10);
        arch.validate().unwrap();
        assert_eq!(arch.alpha_size(), 64);
        assert!(arch.is_standard());
        let expected = (3 * 16 * 9 + 16)
            + (16 * 32 * 9 + 32)
            + (32 * 64 * 9 + 64)
            + (64 * 64 * 9 + 64)
            + (64 * 32 * 9 + 32)
            + (32 * 16 * 9 + 16)
            + (16 * 10 + 10)
            + (3 * 64 + 3);
        assert_eq!(arch.param_count(), expected);
    }

    #[test]
    fn rejects_bad_arch() {
        assert!(ConvArch::miniature(12, 2, 2, 2).validate().is_err());
        assert!(ConvArch::miniature(8, 0, 2, 2).validate().is_err());
        let mut a = ConvArch::miniature(8, 2, 2, 2);
        a.widths[3] = 3;
        assert!(a.validate().is_err());
    }

    #[test]
    fn wrong_input_size_is_rejected() {
        let net = ConvPredictor::<f32>::new(ConvArch::miniature(8, 2, 2, 2), 0, HeadInit::Zero).unwrap();
        assert!(net.forward(&ImagePlane::zeros(16, 16)).is_err());
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        let arch = ConvArch::miniature(16, 3, 2, 3);
        let a = ConvPredictor::<f32>::new(arch, 7, HeadInit::Zero).unwrap();
        let b = ConvPredictor::<f32>::new(arch, 7, HeadInit::Zero).unwrap();
        let c = ConvPredictor::<f32>::new(arch, 8, HeadInit::Zero).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
    }
}
