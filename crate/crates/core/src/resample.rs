//! Bilinear resampling with half-pixel centers.
//!
//! Output sample `o` of an axis of length `out` reads source coordinate
//! `(o + 0.5) * in / out - 0.5`, clamped to `[0, in - 1]` (the
//! "align corners = false" convention). Interpolation uses the lerp form
//! `a + t * (b - a)` so constant inputs are reproduced exactly. Both α
//! upsampling and image resizing go through this one definition.

use rayon::prelude::*;

use crate::error::{invalid_arg, Result};
use crate::scalar::Scalar;

/// Source neighbours and blend factor for one output coordinate.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tap<S> {
    pub lo: usize,
    pub hi: usize,
    pub t: S,
}

/// Taps along one axis, computed with exact integer arithmetic before the
/// single rounding of the fractional part.
pub(crate) fn axis_taps<S: Scalar>(in_len: usize, out_len: usize) -> Vec<Tap<S>> {
    let den = 2 * out_len as i64;
    (0..out_len)
        .map(|o| {
            // src = ((2o + 1) * in - out) / (2 * out)
            let num = (2 * o as i64 + 1) * in_len as i64 - out_len as i64;
            if num <= 0 {
                return Tap {
                    lo: 0,
                    hi: 0,
                    t: S::zero(),
                };
            }
            let lo = (num / den) as usize;
            if lo >= in_len - 1 {
                return Tap {
                    lo: in_len - 1,
                    hi: in_len - 1,
                    t: S::zero(),
                };
            }
            let rem = num % den;
            Tap {
                lo,
                hi: lo + 1,
                t: S::from_i64(rem).unwrap() / S::from_i64(den).unwrap(),
            }
        })
        .collect()
}

#[inline]
fn lerp<S: Scalar>(a: S, b: S, t: S) -> S {
    a + t * (b - a)
}

/// Interpolates all `channels` of one output pixel into `out`.
#[inline]
pub(crate) fn interp_pixel<S: Scalar>(
    src: &[S],
    src_w: usize,
    channels: usize,
    ty: &Tap<S>,
    tx: &Tap<S>,
    out: &mut [S],
) {
    let r0 = ty.lo * src_w;
    let r1 = ty.hi * src_w;
    let (p00, p01) = ((r0 + tx.lo) * channels, (r0 + tx.hi) * channels);
    let (p10, p11) = ((r1 + tx.lo) * channels, (r1 + tx.hi) * channels);
    for c in 0..channels {
        let top = lerp(src[p00 + c], src[p01 + c], tx.t);
        let bottom = lerp(src[p10 + c], src[p11 + c], tx.t);
        out[c] = lerp(top, bottom, ty.t);
    }
}

fn check_dims(src_len: usize, h: usize, w: usize, channels: usize, out_h: usize, out_w: usize) -> Result<()> {
    if h == 0 || w == 0 || channels == 0 {
        return Err(invalid_arg!("source dimensions must be positive, got {h}x{w}x{channels}"));
    }
    if out_h == 0 || out_w == 0 {
        return Err(invalid_arg!("target dimensions must be positive, got {out_h}x{out_w}"));
    }
    if src_len != h * w * channels {
        return Err(invalid_arg!(
            "source has {src_len} values, expected {h}x{w}x{channels}"
        ));
    }
    Ok(())
}

/// Bilinear resize of an interleaved `h×w×channels` map to `out_h×out_w`.
pub fn resize_channels<S: Scalar>(
    src: &[S],
    h: usize,
    w: usize,
    channels: usize,
    out_h: usize,
    out_w: usize,
) -> Result<Vec<S>> {
    check_dims(src.len(), h, w, channels, out_h, out_w)?;
    let ytaps = axis_taps::<S>(h, out_h);
    let xtaps = axis_taps::<S>(w, out_w);
    let mut out = vec![S::zero(); out_h * out_w * channels];
    out.par_chunks_mut(out_w * channels)
        .zip(ytaps.par_iter())
        .for_each(|(row, ty)| {
            for (px, tx) in row.chunks_exact_mut(channels).zip(&xtaps) {
                interp_pixel(src, w, channels, ty, tx, px);
            }
        });
    Ok(out)
}

/// Adjoint of [`resize_channels`]: scatters output gradients back to the source grid.
pub fn resize_channels_backward<S: Scalar>(
    d_out: &[S],
    h: usize,
    w: usize,
    channels: usize,
    out_h: usize,
    out_w: usize,
) -> Result<Vec<S>> {
    check_dims(h * w * channels, h, w, channels, out_h, out_w)?;
    if d_out.len() != out_h * out_w * channels {
        return Err(invalid_arg!(
            "gradient has {} values, expected {out_h}x{out_w}x{channels}",
            d_out.len()
        ));
    }
    let ytaps = axis_taps::<S>(h, out_h);
    let xtaps = axis_taps::<S>(w, out_w);
    let mut d_src = vec![S::zero(); h * w * channels];
    let one = S::one();
    for (oy, ty) in ytaps.iter().enumerate() {
        let r0 = ty.lo * w;
        let r1 = ty.hi * w;
        for (ox, tx) in xtaps.iter().enumerate() {
            let g = &d_out[(oy * out_w + ox) * channels..][..channels];
            let (p00, p01) = ((r0 + tx.lo) * channels, (r0 + tx.hi) * channels);
            let (p10, p11) = ((r1 + tx.lo) * channels, (r1 + tx.hi) * channels);
            for c in 0..channels {
                let d_top = (one - ty.t) * g[c];
                let d_bottom = ty.t * g[c];
                d_src[p00 + c] = d_src[p00 + c] + (one - tx.t) * d_top;
                d_src[p01 + c] = d_src[p01 + c] + tx.t * d_top;
                d_src[p10 + c] = d_src[p10 + c] + (one - tx.t) * d_bottom;
                d_src[p11 + c] = d_src[p11 + c] + tx.t * d_bottom;
            }
        }
    }
    Ok(d_src)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taps_follow_half_pixel_convention() {
        let taps = axis_taps::<f64>(2, 4);
        let coords: Vec<f64> = taps.iter().map(|t| t.lo as f64 + t.t).collect();
        assert_eq!(coords, vec![0.0, 0.25, 0.75, 1.0]);
        let taps = axis_taps::<f64>(4, 2);
        let coords: Vec<f64> = taps.iter().map(|t| t.lo as f64 + t.t).collect();
        assert_eq!(coords, vec![0.5, 2.5]);
    }

    #[test]
    fn same_size_taps_are_integral() {
        for t in axis_taps::<f32>(7, 7) {
            assert_eq!(t.t, 0.0);
        }
    }
}
