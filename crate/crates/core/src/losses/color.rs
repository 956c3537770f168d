//! sRGB → CIELAB conversion and the CIE94 color-difference loss.

use num_traits::Zero;

use super::LossGrad;
use crate::error::{invalid_arg, Result};
use crate::image::{check_same_shape, ImagePlane};
use crate::scalar::{Real, Scalar};

/// Chroma weighting constant of `S_C = 1 + K1·C`.
pub const CIE94_K1: f64 = 0.045;
/// Hue weighting constant of `S_H = 1 + K2·C`.
pub const CIE94_K2: f64 = 0.015;
/// Stabilizer inside the square root.
pub const CIE94_EPSILON: f64 = 1e-8;

/// Linear sRGB → XYZ, D65.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

const DELTA: f64 = 6.0 / 29.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabColor<S> {
    pub l: S,
    pub a: S,
    pub b: S,
}

/// Decoded value and derivative of the sRGB transfer function.
#[inline]
fn srgb_decode<S: Real>(v: S) -> (S, S) {
    if v <= S::lit(0.04045) {
        let k = S::lit(1.0 / 12.92);
        (v * k, k)
    } else {
        let base = (v + S::lit(0.055)) / S::lit(1.055);
        let p = base.powf(S::lit(1.4));
        (p * base, S::lit(2.4 / 1.055) * p)
    }
}

/// CIELAB companding `f(t)` and its derivative.
#[inline]
fn lab_f<S: Real>(t: S) -> (S, S) {
    if t > S::lit(DELTA * DELTA * DELTA) {
        let c = t.cbrt();
        (c, S::one() / (S::lit(3.0) * c * c))
    } else {
        let k = S::lit(1.0 / (3.0 * DELTA * DELTA));
        (t * k + S::lit(4.0 / 29.0), k)
    }
}

/// LAB of an sRGB color together with `∂(L, a, b)/∂(r, g, b)`.
pub fn srgb_to_lab_with_jacobian<S: Real>(rgb: [S; 3]) -> Result<(LabColor<S>, [[S; 3]; 3])> {
    if rgb.iter().any(|v| v.is_nan()) {
        return Err(invalid_arg!("NaN color component {:?}", rgb));
    }
    let mut lin = [S::zero(); 3];
    let mut dlin = [S::zero(); 3];
    for c in 0..3 {
        (lin[c], dlin[c]) = srgb_decode(rgb[c]);
    }
    // normalized XYZ: rows divided by the white point (the row sums)
    let mut f = [S::zero(); 3];
    let mut df = [[S::zero(); 3]; 3];
    for r in 0..3 {
        let row = RGB_TO_XYZ[r];
        let white = S::lit(row[0]) + S::lit(row[1]) + S::lit(row[2]);
        let xyz = S::lit(row[0]) * lin[0] + S::lit(row[1]) * lin[1] + S::lit(row[2]) * lin[2];
        let (fv, fd) = lab_f(xyz / white);
        f[r] = fv;
        for c in 0..3 {
            df[r][c] = fd * S::lit(row[c]) / white * dlin[c];
        }
    }
    let lab = LabColor {
        l: S::lit(116.0) * f[1] - S::lit(16.0),
        a: S::lit(500.0) * (f[0] - f[1]),
        b: S::lit(200.0) * (f[1] - f[2]),
    };
    let mut jac = [[S::zero(); 3]; 3];
    for c in 0..3 {
        jac[0][c] = S::lit(116.0) * df[1][c];
        jac[1][c] = S::lit(500.0) * (df[0][c] - df[1][c]);
        jac[2][c] = S::lit(200.0) * (df[1][c] - df[2][c]);
    }
    Ok((lab, jac))
}

/// sRGB (D65, piecewise transfer curve) → CIELAB (D65 white).
pub fn srgb_to_lab<S: Real>(rgb: [S; 3]) -> Result<LabColor<S>> {
    srgb_to_lab_with_jacobian(rgb).map(|(lab, _)| lab)
}

/// Mean over pixels of
/// `sqrt(ΔL² + (ΔC/S_C)² + ΔH²/S_H² + ε)`, with `S_C`, `S_H` taken from the
/// target chroma and `ΔH² = max(0, Δa² + Δb² − ΔC²)`. The gradient flows
/// through the LAB conversion of `pred` only.
pub fn cie94_loss<S: Real>(pred: &ImagePlane<S>, target: &ImagePlane<S>) -> Result<LossGrad<S>> {
    check_same_shape(pred, target)?;
    let pixels = pred.pixel_count();
    let inv_p = S::one() / S::from_index(pixels.max(1));
    let k1 = S::lit(CIE94_K1);
    let k2 = S::lit(CIE94_K2);
    let eps = S::lit(CIE94_EPSILON);
    let two = S::lit(2.0);
    let mut grad = vec![S::zero(); pred.data().len()];
    let mut sum = S::Acc::zero();
    for (p, g) in grad.chunks_exact_mut(3).enumerate() {
        let pp = &pred.data()[p * 3..p * 3 + 3];
        let tp = &target.data()[p * 3..p * 3 + 3];
        let (lp, jac) = srgb_to_lab_with_jacobian([pp[0], pp[1], pp[2]])?;
        let lt = srgb_to_lab([tp[0], tp[1], tp[2]])?;

        let dl = lp.l - lt.l;
        let da = lp.a - lt.a;
        let db = lp.b - lt.b;
        let cp = lp.a.hypot(lp.b);
        let ct = lt.a.hypot(lt.b);
        let dc = cp - ct;
        let dh2_raw = da * da + db * db - dc * dc;
        let dh2 = dh2_raw.max(S::zero());
        let sc = S::one() + k1 * ct;
        let sh = S::one() + k2 * ct;

        let q = dl * dl + (dc / sc) * (dc / sc) + dh2 / (sh * sh) + eps;
        let val = q.sqrt();
        sum = sum + val.widen();

        let (dcp_da, dcp_db) = if cp > S::zero() {
            (lp.a / cp, lp.b / cp)
        } else {
            (S::zero(), S::zero())
        };
        let chroma = two * dc / (sc * sc);
        let mut dq = [two * dl, chroma * dcp_da, chroma * dcp_db];
        if dh2_raw > S::zero() {
            let sh2 = sh * sh;
            dq[1] = dq[1] + (two * da - two * dc * dcp_da) / sh2;
            dq[2] = dq[2] + (two * db - two * dc * dcp_db) / sh2;
        }
        let scale = inv_p / (two * val);
        for c in 0..3 {
            g[c] = scale * (jac[0][c] * dq[0] + jac[1][c] * dq[1] + jac[2][c] * dq[2]);
        }
    }
    Ok(LossGrad {
        value: S::narrow(sum / S::Acc::from_index(pixels.max(1))),
        grad,
    })
}
