use super::{cie94_loss, monotonicity_loss, mse_loss, smooth_loss, LossGrad};
use crate::error::{invalid_arg, Result};
use crate::image::{check_same_shape, ImagePlane};
use crate::lut::LutBank;
use crate::scalar::Real;
use crate::weights::WeightMap;

/// Coefficients of the weighted training objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub mse: f64,
    pub smooth: f64,
    pub mono: f64,
    pub color: f64,
    /// Only used when a [`PerceptualTerm`] is supplied.
    pub perceptual: f64,
    /// Adds the per-pixel mean of `Σ α²` to the smoothness term.
    pub smooth_alpha: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            mse: 1.0,
            smooth: 1e-4,
            mono: 10.0,
            color: 0.005,
            perceptual: 0.05,
            smooth_alpha: true,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self {
            mse: 0.0,
            smooth: 0.0,
            mono: 0.0,
            color: 0.0,
            perceptual: 0.0,
            smooth_alpha: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("mse", self.mse),
            ("smooth", self.smooth),
            ("mono", self.mono),
            ("color", self.color),
            ("perceptual", self.perceptual),
        ] {
            if !w.is_finite() || w < 0.0 {
                return Err(invalid_arg!("loss weight {name} must be finite and >= 0, got {w}"));
            }
        }
        Ok(())
    }
}

/// A differentiable image-pair term (for example a feature-space distance)
/// plugged into the objective with weight [`LossWeights::perceptual`].
pub trait PerceptualTerm<S>: Sync {
    fn evaluate(&self, pred: &ImagePlane<S>, target: &ImagePlane<S>) -> Result<LossGrad<S>>;
}

/// Unweighted component values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossComponents<S> {
    pub mse: S,
    pub smooth: S,
    pub mono: S,
    pub color: S,
    pub perceptual: S,
}

/// Weighted objective with gradients for every input group.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss<S> {
    pub value: S,
    pub components: LossComponents<S>,
    /// Gradient with respect to the enhanced image.
    pub d_pred: Vec<S>,
    pub d_luts: Vec<Vec<S>>,
    pub d_omega: Vec<S>,
    pub d_alpha: Vec<S>,
}

/// `w_r·L_r + w_s·L_s + w_m·L_m + w_c·L_c + w_p·L_p`.
///
/// Image-space terms contribute to `d_pred`; the regularizers contribute to
/// the LUT and weight gradients directly. Chain `d_pred` through
/// [`backward_apply`](crate::grad::backward_apply) for the full gradient.
pub fn total_loss<S: Real>(
    pred: &ImagePlane<S>,
    target: &ImagePlane<S>,
    bank: &LutBank<S>,
    weights: &WeightMap<S>,
    loss_weights: &LossWeights,
    perceptual: Option<&dyn PerceptualTerm<S>>,
) -> Result<TotalLoss<S>> {
    loss_weights.validate()?;
    check_same_shape(pred, target)?;
    let w_mse = S::lit(loss_weights.mse);
    let w_smooth = S::lit(loss_weights.smooth);
    let w_mono = S::lit(loss_weights.mono);
    let w_color = S::lit(loss_weights.color);
    let w_perc = S::lit(loss_weights.perceptual);

    let mse = mse_loss(pred, target)?;
    let color = cie94_loss(pred, target)?;
    let smooth = smooth_loss(bank, weights, loss_weights.smooth_alpha)?;
    let mono = monotonicity_loss(bank);
    let perc = match perceptual {
        Some(term) => Some(term.evaluate(pred, target)?),
        None => None,
    };

    let mut d_pred: Vec<S> = mse
        .grad
        .iter()
        .zip(&color.grad)
        .map(|(&a, &b)| w_mse * a + w_color * b)
        .collect();
    if let Some(p) = &perc {
        if p.grad.len() != d_pred.len() {
            return Err(invalid_arg!("perceptual gradient has the wrong shape"));
        }
        for (d, &g) in d_pred.iter_mut().zip(&p.grad) {
            *d = *d + w_perc * g;
        }
    }

    let lut_len = bank.lut_len();
    let d_luts = smooth
        .d_luts
        .iter()
        .zip(mono.grad.chunks_exact(lut_len))
        .map(|(s, m)| s.iter().zip(m).map(|(&a, &b)| w_smooth * a + w_mono * b).collect())
        .collect();
    let d_omega = smooth.d_omega.iter().map(|&g| w_smooth * g).collect();
    let d_alpha = smooth.d_alpha.iter().map(|&g| w_smooth * g).collect();

    let perceptual_value = perc.as_ref().map_or(S::zero(), |p| p.value);
    let value = w_mse * mse.value
        + w_smooth * smooth.value
        + w_mono * mono.value
        + w_color * color.value
        + if perc.is_some() { w_perc * perceptual_value } else { S::zero() };

    Ok(TotalLoss {
        value,
        components: LossComponents {
            mse: mse.value,
            smooth: smooth.value,
            mono: mono.value,
            color: color.value,
            perceptual: perceptual_value,
        },
        d_pred,
        d_luts,
        d_omega,
        d_alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero() {
        let bank = LutBank::<f64>::identity(1, 2, 3).unwrap();
        let w = WeightMap::uniform(1, 2, 2, 2).unwrap();
        let a = ImagePlane::filled(2, 2, [0.9; 3]);
        let b = ImagePlane::filled(2, 2, [0.1; 3]);
        let t = total_loss(&a, &b, &bank, &w, &LossWeights::zero(), None).unwrap();
        assert_eq!(t.value, 0.0);
        assert!(t.d_pred.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn only_mse_nonzero() {
        let bank = LutBank::<f64>::identity(1, 1, 2).unwrap();
        let w = WeightMap::new(vec![0.0], 3, 3, 1, vec![0.0; 9]).unwrap();
        let a = ImagePlane::filled(3, 3, [1.0; 3]);
        let b = ImagePlane::zeros(3, 3);
        let lw = LossWeights {
            mse: 1.0,
            ..LossWeights::zero()
        };
        assert_eq!(total_loss(&a, &b, &bank, &w, &lw, None).unwrap().value, 1.0);
    }

    #[test]
    fn negative_weight_is_rejected() {
        let bank = LutBank::<f32>::identity(1, 1, 2).unwrap();
        let w = WeightMap::uniform(1, 1, 1, 1).unwrap();
        let a = ImagePlane::zeros(1, 1);
        let lw = LossWeights {
            mono: -1.0,
            ..LossWeights::default()
        };
        assert!(total_loss(&a, &a, &bank, &w, &lw, None).is_err());
    }

    struct Constant;
    impl PerceptualTerm<f64> for Constant {
        fn evaluate(&self, pred: &ImagePlane<f64>, _: &ImagePlane<f64>) -> Result<LossGrad<f64>> {
            Ok(LossGrad {
                value: 2.0,
                grad: vec![1.0; pred.data().len()],
            })
        }
    }

    #[test]
    fn perceptual_hook_is_weighted() {
        let bank = LutBank::<f64>::identity(1, 1, 2).unwrap();
        let w = WeightMap::new(vec![0.0], 1, 1, 1, vec![0.0]).unwrap();
        let a = ImagePlane::zeros(1, 1);
        let lw = LossWeights {
            perceptual: 0.05,
            ..LossWeights::zero()
        };
        let without = total_loss(&a, &a, &bank, &w, &lw, None).unwrap();
        assert_eq!(without.value, 0.0);
        let with = total_loss(&a, &a, &bank, &w, &lw, Some(&Constant)).unwrap();
        assert!((with.value - 0.1).abs() < 1e-15);
        assert!(with.d_pred.iter().all(|&g| (g - 0.05).abs() < 1e-15));
    }
}
