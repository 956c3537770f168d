//! One forward/backward pass through the whole pipeline.

use crate::apply::apply_spatial_aware;
use crate::error::{invalid_arg, Result};
use crate::grad::{backward_apply, upsample_bilinear_backward};
use crate::image::ImagePlane;
use crate::losses::{total_loss, LossComponents, LossWeights, PerceptualTerm};
use crate::model::{full_weights, Model};
use crate::scalar::Real;

/// Loss and gradients for every trainable value of a [`Model`].
#[derive(Debug, Clone)]
pub struct StepGradients<S> {
    pub value: S,
    pub components: LossComponents<S>,
    pub output: ImagePlane<S>,
    /// One buffer per LUT, scenario-major.
    pub d_luts: Vec<Vec<S>>,
    pub d_params: Vec<S>,
}

fn check_pair<S: Real>(input: &ImagePlane<S>, target: &ImagePlane<S>) -> Result<()> {
    if !input.same_shape(target) {
        return Err(invalid_arg!(
            "input is {}x{} but target is {}x{}",
            input.width(),
            input.height(),
            target.width(),
            target.height()
        ));
    }
    if input.height() == 0 || input.width() == 0 {
        return Err(invalid_arg!("training image has a zero dimension"));
    }
    Ok(())
}

/// Resize → predictor → upsample α → fused apply → objective, then the
/// chained backward pass: objective → apply → upsample adjoint → predictor.
/// The predictor input is a detached copy; no gradient reaches the image.
pub fn loss_and_gradients<S: Real>(
    model: &Model<S>,
    input: &ImagePlane<S>,
    target: &ImagePlane<S>,
    loss_weights: &LossWeights,
    perceptual: Option<&dyn PerceptualTerm<S>>,
) -> Result<StepGradients<S>> {
    check_pair(input, target)?;
    let (h, w) = (input.height(), input.width());
    let m = model.bank.categories();
    let (pred_out, tape) = model.predictor.forward(&model.predictor_input(input)?)?;
    let weights = full_weights(&pred_out, m, h, w)?;
    let output = apply_spatial_aware(&model.bank, &weights, input)?;
    let loss = total_loss(&output, target, &model.bank, &weights, loss_weights, perceptual)?;
    let apply_grads = backward_apply(&model.bank, &weights, input, &loss.d_pred)?;

    let d_luts = apply_grads
        .d_luts
        .iter()
        .zip(&loss.d_luts)
        .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x + y).collect())
        .collect();
    let d_omega: Vec<S> = apply_grads.d_omega.iter().zip(&loss.d_omega).map(|(&a, &b)| a + b).collect();
    let d_alpha: Vec<S> = apply_grads.d_alpha.iter().zip(&loss.d_alpha).map(|(&a, &b)| a + b).collect();
    let a = pred_out.alpha_size;
    let d_alpha_low = upsample_bilinear_backward(&d_alpha, h, w, m, a, a)?;
    let d_params = model.predictor.backward(&tape, &d_omega, &d_alpha_low)?;
    Ok(StepGradients {
        value: loss.value,
        components: loss.components,
        output,
        d_luts,
        d_params,
    })
}

/// Forward-only objective value (same computation as [`loss_and_gradients`]).
pub fn objective<S: Real>(
    model: &Model<S>,
    input: &ImagePlane<S>,
    target: &ImagePlane<S>,
    loss_weights: &LossWeights,
    perceptual: Option<&dyn PerceptualTerm<S>>,
) -> Result<S> {
    check_pair(input, target)?;
    let weights = model.weight_map(input)?;
    let output = apply_spatial_aware(&model.bank, &weights, input)?;
    Ok(total_loss(&output, target, &model.bank, &weights, loss_weights, perceptual)?.value)
}
