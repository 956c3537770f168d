use rayon::prelude::*;

use crate::apply::check_apply_shapes;
use crate::error::{invalid_arg, Result};
use crate::image::ImagePlane;
use crate::lut::{Corners, LutBank};
use crate::scalar::Scalar;
use crate::weights::WeightMap;

/// Gradients of a scalar loss with respect to every input of
/// [`apply_spatial_aware`](crate::apply::apply_spatial_aware) except the image.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplyGradients<S> {
    /// One buffer per LUT, scenario-major (`t * M + m`), shaped like the LUT values.
    pub d_luts: Vec<Vec<S>>,
    /// `H×W×M`, same layout as the weight map.
    pub d_alpha: Vec<S>,
    /// Length `T`.
    pub d_omega: Vec<S>,
}

impl<S: Scalar> ApplyGradients<S> {
    pub fn all_finite(&self) -> bool {
        self.d_luts.iter().flatten().all(|v| v.is_finite_value())
            && self.d_alpha.iter().all(|v| v.is_finite_value())
            && self.d_omega.iter().all(|v| v.is_finite_value())
    }
}

/// Backward pass of the spatial-aware apply for upstream gradient `d_output` (`H×W×3`).
///
/// The forward map is linear in cells, α and ω separately, so
/// * `dL/dcell[t][m]  = ω_t · Σ_p α_m(p) · w_cell(p) · dY(p)`
/// * `dL/dα_m(p)      = Σ_t ω_t · ⟨sample(lut[t][m], p), dY(p)⟩`
/// * `dL/dω_t         = Σ_p Σ_m α_m(p) · ⟨sample(lut[t][m], p), dY(p)⟩`
///
/// Work is split into fixed units (one per category for cells, one
/// per row for α and ω) whose partial results are merged in a fixed order, so
/// the output does not depend on the worker count.
pub fn backward_apply<S: Scalar>(
    bank: &LutBank<S>,
    weights: &WeightMap<S>,
    image: &ImagePlane<S>,
    d_output: &[S],
) -> Result<ApplyGradients<S>> {
    check_apply_shapes(bank, weights, image)?;
    let (h, w) = (image.height(), image.width());
    if d_output.len() != h * w * 3 {
        return Err(invalid_arg!(
            "output gradient has {} entries, expected {h}x{w}x3",
            d_output.len()
        ));
    }
    if d_output.iter().any(|v| v.is_nan_value()) {
        return Err(invalid_arg!("output gradient contains NaN"));
    }
    let n = bank.n_bins();
    let t_count = bank.scenarios();
    let m_count = bank.categories();
    let src = image.data();
    let alpha = weights.alpha();
    let omega = weights.omega();

    let locate = |p: usize| Corners::locate(n, [src[p * 3], src[p * 3 + 1], src[p * 3 + 2]]);

    // α and ω: one unit per row.
    let rows: Vec<(Vec<S>, Vec<S>)> = (0..h)
        .into_par_iter()
        .map(|y| -> Result<(Vec<S>, Vec<S>)> {
            let mut d_alpha_row = vec![S::zero(); w * m_count];
            let mut d_omega_row = vec![S::zero(); t_count];
            for x in 0..w {
                let p = y * w + x;
                let corners = locate(p)?;
                let g = &d_output[p * 3..p * 3 + 3];
                let a = &alpha[p * m_count..(p + 1) * m_count];
                let da = &mut d_alpha_row[x * m_count..(x + 1) * m_count];
                for t in 0..t_count {
                    let mut scen = S::zero();
                    for (m, lut) in bank.row(t).iter().enumerate() {
                        let s = lut.sample_at(&corners);
                        let dot = s[0] * g[0] + s[1] * g[1] + s[2] * g[2];
                        da[m] = da[m] + omega[t] * dot;
                        scen = scen + a[m] * dot;
                    }
                    d_omega_row[t] = d_omega_row[t] + scen;
                }
            }
            Ok((d_alpha_row, d_omega_row))
        })
        .collect::<Result<_>>()?;

    let mut d_alpha = Vec::with_capacity(h * w * m_count);
    let mut d_omega = vec![S::zero(); t_count];
    for (da, dw) in rows {
        d_alpha.extend_from_slice(&da);
        for (acc, v) in d_omega.iter_mut().zip(dw) {
            *acc = *acc + v;
        }
    }

    // Cells: the α-weighted scatter is shared by every scenario, one unit per category.
    let cells = n * n * n;
    let shared: Vec<Vec<S>> = (0..m_count)
        .into_par_iter()
        .map(|m| -> Result<Vec<S>> {
            let mut buf = vec![S::zero(); cells * 3];
            for p in 0..h * w {
                let a = alpha[p * m_count + m];
                let g = &d_output[p * 3..p * 3 + 3];
                let coef = [a * g[0], a * g[1], a * g[2]];
                if coef.iter().all(|&c| c == S::zero()) {
                    continue;
                }
                let corners = locate(p)?;
                for k in 0..8 {
                    let o = corners.offsets[k];
                    let wk = corners.weights[k];
                    for c in 0..3 {
                        buf[o + c] = buf[o + c] + wk * coef[c];
                    }
                }
            }
            Ok(buf)
        })
        .collect::<Result<_>>()?;
    let mut d_luts = Vec::with_capacity(t_count * m_count);
    for &wt in omega {
        for g in &shared {
            d_luts.push(g.iter().map(|&v| wt * v).collect());
        }
    }

    Ok(ApplyGradients {
        d_luts,
        d_alpha,
        d_omega,
    })
}
