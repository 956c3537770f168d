//! Planar (`C×H×W`) 2D convolution with zero padding.

use crate::scalar::Real;

/// Square kernel convolution; padding is `kernel / 2` on every side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvSpec {
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvSpec {
    pub const fn new(in_c: usize, out_c: usize, kernel: usize, stride: usize) -> Self {
        Self {
            in_c,
            out_c,
            kernel,
            stride,
        }
    }

    #[inline]
    pub fn weight_len(&self) -> usize {
        self.out_c * self.in_c * self.kernel * self.kernel
    }

    #[inline]
    pub fn param_len(&self) -> usize {
        self.weight_len() + self.out_c
    }

    #[inline]
    pub fn fan_in(&self) -> usize {
        self.in_c * self.kernel * self.kernel
    }

    #[inline]
    fn pad(&self) -> usize {
        self.kernel / 2
    }

    #[inline]
    pub fn out_dim(&self, d: usize) -> usize {
        (d + 2 * self.pad() - self.kernel) / self.stride + 1
    }

    /// Output indices `o` whose input tap `o * stride + k - pad` lies in `[0, in_len)`.
    #[inline]
    fn valid_range(&self, k: usize, in_len: usize, out_len: usize) -> std::ops::Range<usize> {
        let pad = self.pad();
        let lo = if k >= pad { 0 } else { (pad - k).div_ceil(self.stride) };
        // o * stride + k - pad <= in_len - 1
        let limit = in_len - 1 + pad;
        let hi = if limit < k { 0 } else { ((limit - k) / self.stride + 1).min(out_len) };
        lo..hi.max(lo)
    }
}

/// Unfolds the receptive fields into a `(in_c·k·k) × (oh·ow)` matrix whose
/// row `(ic, ky, kx)` holds the tap of every output position (zero where the
/// tap falls into padding).
fn im2col<S: Real>(spec: &ConvSpec, input: &[S], h: usize, w: usize) -> Vec<S> {
    let (oh, ow) = (spec.out_dim(h), spec.out_dim(w));
    let (k, s, pad) = (spec.kernel, spec.stride, spec.pad());
    let n = oh * ow;
    let mut cols = vec![S::zero(); spec.fan_in() * n];
    for ic in 0..spec.in_c {
        let src = &input[ic * h * w..(ic + 1) * h * w];
        for ky in 0..k {
            let rows = spec.valid_range(ky, h, oh);
            for kx in 0..k {
                let r = (ic * k + ky) * k + kx;
                let dst = &mut cols[r * n..(r + 1) * n];
                let valid = spec.valid_range(kx, w, ow);
                for oy in rows.clone() {
                    let src_row = &src[(oy * s + ky - pad) * w..];
                    let dst_row = &mut dst[oy * ow..(oy + 1) * ow];
                    for ox in valid.clone() {
                        dst_row[ox] = src_row[ox * s + kx - pad];
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input.
fn col2im<S: Real>(spec: &ConvSpec, cols: &[S], h: usize, w: usize) -> Vec<S> {
    let (oh, ow) = (spec.out_dim(h), spec.out_dim(w));
    let (k, s, pad) = (spec.kernel, spec.stride, spec.pad());
    let n = oh * ow;
    let mut out = vec![S::zero(); spec.in_c * h * w];
    for ic in 0..spec.in_c {
        let dst = &mut out[ic * h * w..(ic + 1) * h * w];
        for ky in 0..k {
            let rows = spec.valid_range(ky, h, oh);
            for kx in 0..k {
                let r = (ic * k + ky) * k + kx;
                let src = &cols[r * n..(r + 1) * n];
                let valid = spec.valid_range(kx, w, ow);
                for oy in rows.clone() {
                    let dst_row = &mut dst[(oy * s + ky - pad) * w..];
                    let src_row = &src[oy * ow..(oy + 1) * ow];
                    for ox in valid.clone() {
                        let ix = ox * s + kx - pad;
                        dst_row[ix] = dst_row[ix] + src_row[ox];
                    }
                }
            }
        }
    }
    out
}

fn is_pointwise(spec: &ConvSpec) -> bool {
    spec.kernel == 1 && spec.stride == 1
}

/// Returns the `out_c × oh × ow` output.
pub(crate) fn conv_forward<S: Real>(
    spec: &ConvSpec,
    params: &[S],
    input: &[S],
    h: usize,
    w: usize,
) -> Vec<S> {
    debug_assert_eq!(params.len(), spec.param_len());
    debug_assert_eq!(input.len(), spec.in_c * h * w);
    let n = spec.out_dim(h) * spec.out_dim(w);
    let (weights, bias) = params.split_at(spec.weight_len());
    let mut out: Vec<S> = bias.iter().flat_map(|&b| std::iter::repeat_n(b, n)).collect();
    let unfolded;
    let cols = if is_pointwise(spec) {
        input
    } else {
        unfolded = im2col(spec, input, h, w);
        &unfolded
    };
    let kk = spec.fan_in();
    S::gemm_acc(spec.out_c, kk, n, weights, (kk, 1), cols, (n, 1), &mut out);
    out
}

/// Gradients of a convolution: `(d_input, d_params)`. `d_input` is skipped
/// (returned empty) when `need_input_grad` is false.
pub(crate) fn conv_backward<S: Real>(
    spec: &ConvSpec,
    params: &[S],
    input: &[S],
    h: usize,
    w: usize,
    d_out: &[S],
    need_input_grad: bool,
) -> (Vec<S>, Vec<S>) {
    let n = spec.out_dim(h) * spec.out_dim(w);
    debug_assert_eq!(d_out.len(), spec.out_c * n);
    let weights = &params[..spec.weight_len()];
    let kk = spec.fan_in();
    let unfolded;
    let cols = if is_pointwise(spec) {
        input
    } else {
        unfolded = im2col(spec, input, h, w);
        &unfolded
    };

    // dW = dY · colsᵀ, db = row sums of dY
    let mut d_params = vec![S::zero(); spec.param_len()];
    S::gemm_acc(spec.out_c, n, kk, d_out, (n, 1), cols, (1, n), &mut d_params[..spec.weight_len()]);
    for (oc, db) in d_params[spec.weight_len()..].iter_mut().enumerate() {
        *db = d_out[oc * n..(oc + 1) * n].iter().fold(S::zero(), |a, &v| a + v);
    }

    if !need_input_grad {
        return (Vec::new(), d_params);
    }

    // d_cols = Wᵀ · dY
    let mut d_cols = vec![S::zero(); kk * n];
    S::gemm_acc(kk, spec.out_c, n, weights, (1, kk), d_out, (n, 1), &mut d_cols);
    let d_input = if is_pointwise(spec) { d_cols } else { col2im(spec, &d_cols, h, w) };
    (d_input, d_params)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct definition: zero-padded correlation evaluated tap by tap.
    fn reference(spec: &ConvSpec, params: &[f64], input: &[f64], h: usize, w: usize) -> Vec<f64> {
        let (oh, ow) = (spec.out_dim(h), spec.out_dim(w));
        let k = spec.kernel as isize;
        let pad = (spec.kernel / 2) as isize;
        let mut out = vec![0.0; spec.out_c * oh * ow];
        for oc in 0..spec.out_c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = params[spec.weight_len() + oc];
                    for ic in 0..spec.in_c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * spec.stride) as isize + ky - pad;
                                let ix = (ox * spec.stride) as isize + kx - pad;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let wi = ((oc * spec.in_c + ic) * spec.kernel + ky as usize)
                                    * spec.kernel
                                    + kx as usize;
                                acc += params[wi] * input[(ic * h + iy as usize) * w + ix as usize];
                            }
                        }
                    }
                    out[(oc * oh + oy) * ow + ox] = acc;
                }
            }
        }
        out
    }

    fn pseudo(n: usize, seed: u64) -> Vec<f64> {
        (0..n)
            .map(|i| (((i as u64 * 2654435761 + seed * 97) % 1000) as f64 / 500.0) - 1.0)
            .collect()
    }

    #[test]
    fn output_dims() {
        assert_eq!(ConvSpec::new(3, 4, 3, 2).out_dim(256), 128);
        assert_eq!(ConvSpec::new(3, 4, 3, 2).out_dim(7), 4);
        assert_eq!(ConvSpec::new(3, 4, 3, 1).out_dim(9), 9);
        assert_eq!(ConvSpec::new(3, 4, 1, 1).out_dim(5), 5);
    }

    #[test]
    fn forward_matches_direct_definition() {
        for (spec, h, w) in [
            (ConvSpec::new(2, 3, 3, 1), 5, 4),
            (ConvSpec::new(3, 2, 3, 2), 7, 6),
            (ConvSpec::new(2, 2, 1, 1), 3, 3),
            (ConvSpec::new(1, 1, 3, 2), 1, 1),
        ] {
            let params = pseudo(spec.param_len(), 1);
            let input = pseudo(spec.in_c * h * w, 2);
            let got = conv_forward(&spec, &params, &input, h, w);
            let want = reference(&spec, &params, &input, h, w);
            for (g, e) in got.iter().zip(&want) {
                assert!((g - e).abs() < 1e-12, "{spec:?}");
            }
        }
    }

    #[test]
    fn backward_is_adjoint_of_forward() {
        // <conv(x) - bias, g> == <x, d_input(g)> and == <w, d_weights(g)>
        let (spec, h, w) = (ConvSpec::new(2, 3, 3, 2), 6, 5);
        let params = pseudo(spec.param_len(), 3);
        let mut no_bias = params.clone();
        for b in &mut no_bias[spec.weight_len()..] {
            *b = 0.0;
        }
        let input = pseudo(spec.in_c * h * w, 4);
        let out = conv_forward(&spec, &no_bias, &input, h, w);
        let g = pseudo(out.len(), 5);
        let (d_in, d_p) = conv_backward(&spec, &no_bias, &input, h, w, &g, true);
        let lhs: f64 = out.iter().zip(&g).map(|(a, b)| a * b).sum();
        let via_input: f64 = input.iter().zip(&d_in).map(|(a, b)| a * b).sum();
        let via_weights: f64 = no_bias[..spec.weight_len()]
            .iter()
            .zip(&d_p[..spec.weight_len()])
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs - via_input).abs() < 1e-10);
        assert!((lhs - via_weights).abs() < 1e-10);
        let bias_grad: f64 = g[..spec.out_dim(h) * spec.out_dim(w)].iter().sum();
        assert!((d_p[spec.weight_len()] - bias_grad).abs() < 1e-12);
    }
}
