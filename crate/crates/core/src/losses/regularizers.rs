//! LUT regularizers: adjacent-cell smoothness and monotonicity.

use num_traits::Zero;

use super::LossGrad;
use crate::error::{invalid_arg, Result};
use crate::lut::{Lut3d, LutBank};
use crate::scalar::{Real, Scalar};
use crate::weights::WeightMap;

/// Smoothness value split by term, with gradients for cells, ω and α.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothLoss<S> {
    pub value: S,
    pub lut_term: S,
    pub omega_term: S,
    pub alpha_term: S,
    pub d_luts: Vec<Vec<S>>,
    pub d_omega: Vec<S>,
    pub d_alpha: Vec<S>,
}

/// Calls `f(cur, next)` for every pair of lattice-adjacent cell offsets.
fn for_each_adjacent(n: usize, mut f: impl FnMut(usize, usize)) {
    let strides = [n * n * 3, n * 3, 3];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let cur = ((i * n + j) * n + k) * 3;
                let idx = [i, j, k];
                for axis in 0..3 {
                    if idx[axis] + 1 < n {
                        f(cur, cur + strides[axis]);
                    }
                }
            }
        }
    }
}

fn lut_smoothness<S: Real>(lut: &Lut3d<S>) -> (S::Acc, Vec<S>) {
    let v = lut.values();
    let mut grad = vec![S::zero(); v.len()];
    let mut sum = S::Acc::zero();
    let two = S::lit(2.0);
    for_each_adjacent(lut.n_bins(), |cur, next| {
        for c in 0..3 {
            let d = v[next + c] - v[cur + c];
            sum = sum + d.widen() * d.widen();
            grad[next + c] = grad[next + c] + two * d;
            grad[cur + c] = grad[cur + c] - two * d;
        }
    });
    (sum, grad)
}

/// Sum over all LUTs of squared adjacent-cell differences (three axes, three
/// channels), plus `‖ω‖²`, plus (when `alpha_term` is set) the per-pixel mean
/// of `Σ_m α_m²`.
pub fn smooth_loss<S: Real>(
    bank: &LutBank<S>,
    weights: &WeightMap<S>,
    alpha_term: bool,
) -> Result<SmoothLoss<S>> {
    if weights.scenarios() != bank.scenarios() || weights.categories() != bank.categories() {
        return Err(invalid_arg!(
            "weights are T={} M={} but the bank is T={} M={}",
            weights.scenarios(),
            weights.categories(),
            bank.scenarios(),
            bank.categories()
        ));
    }
    let mut lut_sum = S::Acc::zero();
    let mut d_luts = Vec::with_capacity(bank.luts().len());
    for lut in bank.luts() {
        let (s, g) = lut_smoothness(lut);
        lut_sum = lut_sum + s;
        d_luts.push(g);
    }

    let two = S::lit(2.0);
    let omega_sum = weights.omega().iter().fold(S::Acc::zero(), |a, w| a + w.widen() * w.widen());
    let d_omega = weights.omega().iter().map(|&w| two * w).collect();

    let pixels = weights.height() * weights.width();
    let (alpha_mean, d_alpha) = if alpha_term && pixels > 0 {
        let sum = weights.alpha().iter().fold(S::Acc::zero(), |acc, a| acc + a.widen() * a.widen());
        let scale = two / S::from_index(pixels);
        (
            sum / S::Acc::from_index(pixels),
            weights.alpha().iter().map(|&a| scale * a).collect(),
        )
    } else {
        (S::Acc::zero(), vec![S::zero(); weights.alpha().len()])
    };

    Ok(SmoothLoss {
        value: S::narrow(lut_sum + omega_sum + alpha_mean),
        lut_term: S::narrow(lut_sum),
        omega_term: S::narrow(omega_sum),
        alpha_term: S::narrow(alpha_mean),
        d_luts,
        d_omega,
        d_alpha,
    })
}

/// Sum over adjacent cell pairs of `max(0, cur - next)` per channel; the
/// subgradient at ties is zero. Gradients are returned per LUT, concatenated
/// scenario-major.
pub fn monotonicity_loss<S: Real>(bank: &LutBank<S>) -> LossGrad<S> {
    let mut sum = S::Acc::zero();
    let mut grad = Vec::with_capacity(bank.luts().len() * bank.lut_len());
    for lut in bank.luts() {
        let v = lut.values();
        let mut g = vec![S::zero(); v.len()];
        for_each_adjacent(lut.n_bins(), |cur, next| {
            for c in 0..3 {
                let d = v[cur + c] - v[next + c];
                if d > S::zero() {
                    sum = sum + d.widen();
                    g[cur + c] = g[cur + c] + S::one();
                    g[next + c] = g[next + c] - S::one();
                }
            }
        });
        grad.extend_from_slice(&g);
    }
    LossGrad {
        value: S::narrow(sum),
        grad,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force smoothness: explicit neighbour enumeration over (i, j, k).
    fn brute_smooth(lut: &Lut3d<f64>) -> f64 {
        let n = lut.n_bins();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let here = lut.cell(i, j, k);
                    let mut neighbours = vec![];
                    if i + 1 < n {
                        neighbours.push(lut.cell(i + 1, j, k));
                    }
                    if j + 1 < n {
                        neighbours.push(lut.cell(i, j + 1, k));
                    }
                    if k + 1 < n {
                        neighbours.push(lut.cell(i, j, k + 1));
                    }
                    for nb in neighbours {
                        for c in 0..3 {
                            s += (nb[c] - here[c]).powi(2);
                        }
                    }
                }
            }
        }
        s
    }

    #[test]
    fn identity_closed_form_matches_brute_force() {
        for n in [2usize, 3, 5, 9] {
            let bank = LutBank::<f64>::identity(1, 1, n).unwrap();
            let w = WeightMap::new(vec![0.0], 1, 1, 1, vec![0.0]).unwrap();
            let s = smooth_loss(&bank, &w, false).unwrap();
            let closed = 3.0 * (n * n) as f64 / (n - 1) as f64;
            let brute = brute_smooth(bank.lut(0, 0));
            assert!((s.lut_term - closed).abs() < 1e-9 * closed, "n={n}");
            assert!((brute - closed).abs() < 1e-9 * closed, "n={n}");
        }
    }

    #[test]
    fn constant_lut_has_no_lut_term() {
        let lut = Lut3d::<f64>::constant(4, [0.3, 0.1, 0.9]).unwrap();
        let bank = LutBank::from_luts(1, 1, vec![lut]).unwrap();
        let w = WeightMap::new(vec![1.0], 1, 1, 1, vec![1.0]).unwrap();
        let s = smooth_loss(&bank, &w, false).unwrap();
        assert_eq!(s.lut_term, 0.0);
        assert_eq!(s.omega_term, 1.0);
    }

    #[test]
    fn one_hot_omega_term_is_one() {
        let bank = LutBank::<f32>::identity(3, 1, 2).unwrap();
        let w = WeightMap::new(vec![1.0, 0.0, 0.0], 1, 1, 1, vec![1.0]).unwrap();
        assert_eq!(smooth_loss(&bank, &w, false).unwrap().omega_term, 1.0);
    }

    #[test]
    fn alpha_term_is_pixel_mean() {
        let bank = LutBank::<f64>::identity(1, 2, 2).unwrap();
        let w = WeightMap::new(vec![1.0], 1, 2, 2, vec![1.0, 0.0, 0.5, 0.5]).unwrap();
        let s = smooth_loss(&bank, &w, true).unwrap();
        assert!((s.alpha_term - 0.75).abs() < 1e-12);
        assert_eq!(s.d_alpha, vec![1.0, 0.0, 0.5, 0.5]);
        let off = smooth_loss(&bank, &w, false).unwrap();
        assert_eq!(off.alpha_term, 0.0);
    }

    #[test]
    fn identity_is_monotone() {
        let bank = LutBank::<f64>::identity(2, 2, 5).unwrap();
        let l = monotonicity_loss(&bank);
        assert_eq!(l.value, 0.0);
        assert!(l.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn reversed_identity_is_penalized() {
        let lut = Lut3d::<f64>::identity(4).unwrap();
        let rev = Lut3d::from_values(4, lut.values().iter().map(|v| 1.0 - v).collect()).unwrap();
        let bank = LutBank::from_luts(1, 1, vec![rev]).unwrap();
        assert!(monotonicity_loss(&bank).value > 0.0);
    }

    #[test]
    fn two_bin_red_inversion_hand_value() {
        // red 0.6 at i=0 and 0.1 at i=1; four (j, k) pairs each decrease by 0.5
        let lut = Lut3d::<f64>::from_fn(2, |i, j, k| {
            [if i == 0 { 0.6 } else { 0.1 }, j as f64, k as f64]
        })
        .unwrap();
        let bank = LutBank::from_luts(1, 1, vec![lut]).unwrap();
        let l = monotonicity_loss(&bank);
        assert!((l.value - 2.0).abs() < 1e-12, "{}", l.value);
    }
}
