//! Spatial-aware LUT fusion.
//!
//! Every pixel is mapped as
//! `Σ_t ω_t · Σ_m α_m(pixel) · sample(lut[t][m], pixel)`, summed in exactly
//! that order (scenarios outer, categories inner, each accumulator starting
//! from zero). Nothing is clamped here; clamping belongs to 8-bit output.

use rayon::prelude::*;

use crate::error::{invalid_arg, Result};
use crate::image::ImagePlane;
use crate::lut::{Corners, Lut3d, LutBank};
use crate::resample::{axis_taps, interp_pixel};
use crate::scalar::Scalar;
use crate::weights::{check_simplex, WeightMap};

/// Simplex tolerance for [`flatten_bank`].
pub const FLATTEN_SIMPLEX_TOLERANCE: f64 = 1e-4;

/// `Σ_m α_m · sample(lut_m, color)` for one pixel.
pub fn fuse_category<S: Scalar>(row: &[Lut3d<S>], alpha: &[S], color: [S; 3]) -> Result<[S; 3]> {
    if alpha.len() != row.len() {
        return Err(invalid_arg!(
            "alpha has {} entries but the row has {} LUTs",
            alpha.len(),
            row.len()
        ));
    }
    if row.is_empty() {
        return Err(invalid_arg!("empty LUT row"));
    }
    let n = row[0].n_bins();
    if row.iter().any(|l| l.n_bins() != n) {
        return Err(invalid_arg!("LUTs in a row must share one resolution"));
    }
    let corners = Corners::locate(n, color)?;
    let mut out = [S::zero(); 3];
    for (lut, &a) in row.iter().zip(alpha) {
        let s = lut.sample_at(&corners);
        for c in 0..3 {
            out[c] = out[c] + a * s[c];
        }
    }
    Ok(out)
}

/// Bank cells interleaved so the `T×M` triples of one lattice cell are
/// contiguous: `data[(cell * T * M + t * M + m) * 3 + c]`.
pub(crate) struct PackedBank<S> {
    data: Vec<S>,
    scenarios: usize,
    categories: usize,
}

impl<S: Scalar> PackedBank<S> {
    pub(crate) fn new(bank: &LutBank<S>) -> Self {
        let tm = bank.luts().len();
        let cells = bank.lut_len() / 3;
        let mut data = vec![S::zero(); cells * tm * 3];
        for (l, lut) in bank.luts().iter().enumerate() {
            for (cell, v) in lut.values().chunks_exact(3).enumerate() {
                let o = (cell * tm + l) * 3;
                data[o..o + 3].copy_from_slice(v);
            }
        }
        Self {
            data,
            scenarios: bank.scenarios(),
            categories: bank.categories(),
        }
    }

    /// A single-scenario bank with cells `Σ_t ω_t · cell[t][m]`.
    pub(crate) fn folded(bank: &LutBank<S>, omega: &[S]) -> Self {
        let m_count = bank.categories();
        let len = bank.lut_len();
        let mut data = Vec::with_capacity(len * m_count);
        for cell in (0..len).step_by(3) {
            for m in 0..m_count {
                for c in cell..cell + 3 {
                    let mut acc = S::zero();
                    for (t, &w) in omega.iter().enumerate() {
                        acc = acc + w * bank.lut(t, m).values()[c];
                    }
                    data.push(acc);
                }
            }
        }
        Self {
            data,
            scenarios: 1,
            categories: m_count,
        }
    }

    pub(crate) fn scratch_len(&self) -> usize {
        self.scenarios * self.categories * 3
    }

    /// `Σ_t ω_t Σ_m α_m · trilinear(lut[t][m])`, each sample summed over
    /// corners in order, exactly as [`Lut3d::sample_at`]. `scratch` must hold
    /// [`scratch_len`](Self::scratch_len) values.
    #[inline]
    pub(crate) fn fused_pixel(&self, omega: &[S], alpha: &[S], corners: &Corners<S>, scratch: &mut [S]) -> [S; 3] {
        let tm3 = scratch.len();
        scratch.iter_mut().for_each(|v| *v = S::zero());
        // corners outer: the T·M·3 values of one lattice cell are contiguous
        for c in 0..8 {
            let base = corners.offsets[c] * self.scenarios * self.categories;
            let wc = corners.weights[c];
            for (acc, &v) in scratch.iter_mut().zip(&self.data[base..base + tm3]) {
                *acc = *acc + wc * v;
            }
        }
        let mut out = [S::zero(); 3];
        for (t, &w) in omega.iter().enumerate() {
            let mut inner = [S::zero(); 3];
            for (m, &a) in alpha.iter().enumerate() {
                let s = &scratch[(t * self.categories + m) * 3..][..3];
                for c in 0..3 {
                    inner[c] = inner[c] + a * s[c];
                }
            }
            for c in 0..3 {
                out[c] = out[c] + w * inner[c];
            }
        }
        out
    }
}

pub(crate) fn check_apply_shapes<S: Scalar>(
    bank: &LutBank<S>,
    weights: &WeightMap<S>,
    image: &ImagePlane<S>,
) -> Result<()> {
    if weights.scenarios() != bank.scenarios() || weights.categories() != bank.categories() {
        return Err(invalid_arg!(
            "weights are T={} M={} but the bank is T={} M={}",
            weights.scenarios(),
            weights.categories(),
            bank.scenarios(),
            bank.categories()
        ));
    }
    if weights.height() != image.height() || weights.width() != image.width() {
        return Err(invalid_arg!(
            "alpha is {}x{} but the image is {}x{}",
            weights.height(),
            weights.width(),
            image.height(),
            image.width()
        ));
    }
    Ok(())
}

/// Enhances `image` with the bank fused by full-resolution weights.
pub fn apply_spatial_aware<S: Scalar>(
    bank: &LutBank<S>,
    weights: &WeightMap<S>,
    image: &ImagePlane<S>,
) -> Result<ImagePlane<S>> {
    check_apply_shapes(bank, weights, image)?;
    let (h, w) = (image.height(), image.width());
    let n = bank.n_bins();
    let omega = weights.omega();
    let m = bank.categories();
    let src = image.data();
    let alpha = weights.alpha();
    let packed = PackedBank::new(bank);
    let mut out = vec![S::zero(); h * w * 3];
    out.par_chunks_mut(w * 3)
        .enumerate()
        .try_for_each(|(y, row)| -> Result<()> {
            let mut scratch = vec![S::zero(); packed.scratch_len()];
            for x in 0..w {
                let p = y * w + x;
                let color = [src[p * 3], src[p * 3 + 1], src[p * 3 + 2]];
                let corners = Corners::locate(n, color)?;
                let px = packed.fused_pixel(omega, &alpha[p * m..(p + 1) * m], &corners, &mut scratch);
                row[x * 3..x * 3 + 3].copy_from_slice(&px);
            }
            Ok(())
        })?;
    ImagePlane::new(h, w, out)
}

/// Same result as upsampling `alpha_low` with
/// [`upsample_bilinear`](crate::grad::upsample_bilinear) and calling
/// [`apply_spatial_aware`], without materializing the full-resolution map.
///
/// `ω` is folded into the cells once up front, so every pixel reads `M`
/// LUTs instead of `T·M`. The sum is therefore associated differently from
/// [`apply_spatial_aware`] and agrees with it to rounding.
pub fn apply_with_lowres_alpha<S: Scalar>(
    bank: &LutBank<S>,
    omega: &[S],
    alpha_low: &[S],
    low_h: usize,
    low_w: usize,
    image: &ImagePlane<S>,
) -> Result<ImagePlane<S>> {
    let m = bank.categories();
    if omega.len() != bank.scenarios() {
        return Err(invalid_arg!(
            "omega has {} entries, bank has T={}",
            omega.len(),
            bank.scenarios()
        ));
    }
    if low_h == 0 || low_w == 0 || alpha_low.len() != low_h * low_w * m {
        return Err(invalid_arg!(
            "low-resolution alpha has {} entries, expected {low_h}x{low_w}x{m}",
            alpha_low.len()
        ));
    }
    let (h, w) = (image.height(), image.width());
    if h == 0 || w == 0 {
        return Err(invalid_arg!("image has a zero dimension"));
    }
    let n = bank.n_bins();
    let ytaps = axis_taps::<S>(low_h, h);
    let xtaps = axis_taps::<S>(low_w, w);
    let packed = PackedBank::folded(bank, omega);
    let one = [S::one()];
    let src = image.data();
    let mut out = vec![S::zero(); h * w * 3];
    out.par_chunks_mut(w * 3)
        .zip(ytaps.par_iter())
        .enumerate()
        .try_for_each(|(y, (row, ty))| -> Result<()> {
            let mut alpha_px = vec![S::zero(); m];
            let mut scratch = vec![S::zero(); packed.scratch_len()];
            for (x, tx) in xtaps.iter().enumerate() {
                interp_pixel(alpha_low, low_w, m, ty, tx, &mut alpha_px);
                let p = y * w + x;
                let color = [src[p * 3], src[p * 3 + 1], src[p * 3 + 2]];
                let corners = Corners::locate(n, color)?;
                let px = packed.fused_pixel(&one, &alpha_px, &corners, &mut scratch);
                row[x * 3..x * 3 + 3].copy_from_slice(&px);
            }
            Ok(())
        })?;
    ImagePlane::new(h, w, out)
}

/// Collapses the bank into one LUT for spatially constant weights.
///
/// Cells are `Σ_t ω_t · Σ_m α_m · cell[t][m]`. By linearity of trilinear
/// interpolation in cell values, sampling the result equals applying the bank
/// with those constant weights (up to floating-point reassociation; exactly
/// for exact scalars).
pub fn flatten_bank<S: Scalar>(bank: &LutBank<S>, omega: &[S], alpha: &[S]) -> Result<Lut3d<S>> {
    if omega.len() != bank.scenarios() || alpha.len() != bank.categories() {
        return Err(invalid_arg!(
            "flatten weights are T={} M={} but the bank is T={} M={}",
            omega.len(),
            alpha.len(),
            bank.scenarios(),
            bank.categories()
        ));
    }
    check_simplex(omega, FLATTEN_SIMPLEX_TOLERANCE).map_err(|e| invalid_arg!("omega: {e}"))?;
    check_simplex(alpha, FLATTEN_SIMPLEX_TOLERANCE).map_err(|e| invalid_arg!("alpha: {e}"))?;
    let len = bank.lut_len();
    let values = (0..len)
        .map(|v| {
            let mut acc = S::zero();
            for (t, &w) in omega.iter().enumerate() {
                let mut inner = S::zero();
                for (lut, &a) in bank.row(t).iter().zip(alpha) {
                    inner = inner + a * lut.values()[v];
                }
                acc = acc + w * inner;
            }
            acc
        })
        .collect();
    Lut3d::from_values(bank.n_bins(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convex_combination_of_constants() {
        let row = vec![
            Lut3d::<f64>::constant(3, [0.2; 3]).unwrap(),
            Lut3d::<f64>::constant(3, [0.6; 3]).unwrap(),
        ];
        let out = fuse_category(&row, &[0.3, 0.7], [0.4, 0.1, 0.9]).unwrap();
        for v in out {
            assert!((v - 0.48).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_selects_a_lut() {
        let row = vec![
            Lut3d::<f32>::constant(3, [0.2; 3]).unwrap(),
            Lut3d::<f32>::from_fn(3, |i, j, k| [k as f32 * 0.3, j as f32 * 0.1, i as f32 * 0.5]).unwrap(),
        ];
        let c = [0.3, 0.6, 0.8];
        assert_eq!(fuse_category(&row, &[0.0, 1.0], c).unwrap(), row[1].sample(c).unwrap());
    }

    #[test]
    fn wrong_alpha_length_is_rejected() {
        let row = vec![Lut3d::<f32>::identity(3).unwrap()];
        assert!(fuse_category(&row, &[0.5, 0.5], [0.0; 3]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let bank = LutBank::<f32>::identity(2, 3, 3).unwrap();
        let img = ImagePlane::<f32>::zeros(4, 4);
        let wrong_m = WeightMap::uniform(2, 2, 4, 4).unwrap();
        assert!(apply_spatial_aware(&bank, &wrong_m, &img).is_err());
        let wrong_hw = WeightMap::uniform(2, 3, 4, 5).unwrap();
        assert!(apply_spatial_aware(&bank, &wrong_hw, &img).is_err());
    }

    #[test]
    fn flatten_rejects_off_simplex() {
        let bank = LutBank::<f32>::identity(1, 2, 3).unwrap();
        assert!(flatten_bank(&bank, &[1.0], &[0.6, 0.6]).is_err());
        assert!(flatten_bank(&bank, &[1.0], &[1.0 + 5e-5, -5e-5]).is_ok());
    }

    #[test]
    fn flatten_one_hot_copies_lut() {
        let luts = vec![
            Lut3d::<f32>::from_fn(3, |i, j, k| [i as f32 * 0.2, j as f32 * 0.3, k as f32 * 0.4]).unwrap(),
            Lut3d::<f32>::constant(3, [0.9; 3]).unwrap(),
        ];
        let bank = LutBank::from_luts(1, 2, luts).unwrap();
        let flat = flatten_bank(&bank, &[1.0], &[1.0, 0.0]).unwrap();
        assert_eq!(&flat, bank.lut(0, 0));
    }
}
