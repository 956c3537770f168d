use num_traits::Zero;

use super::LossGrad;
use crate::error::Result;
use crate::image::{check_same_shape, ImagePlane};
use crate::scalar::{Real, Scalar};

/// Mean of squared component differences; gradient with respect to `pred`.
pub fn mse_loss<S: Real>(pred: &ImagePlane<S>, target: &ImagePlane<S>) -> Result<LossGrad<S>> {
    check_same_shape(pred, target)?;
    let count = pred.data().len();
    let scale = S::lit(2.0) / S::from_index(count.max(1));
    let mut sum = S::Acc::zero();
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            sum = sum + d.widen() * d.widen();
            scale * d
        })
        .collect();
    Ok(LossGrad {
        value: S::narrow(sum / S::Acc::from_index(count.max(1))),
        grad,
    })
}
