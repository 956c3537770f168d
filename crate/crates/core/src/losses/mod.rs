//! Training objectives and their analytic gradients.

mod color;
mod mse;
mod regularizers;
mod total;

pub use color::{
    cie94_loss, srgb_to_lab, srgb_to_lab_with_jacobian, LabColor, CIE94_EPSILON, CIE94_K1, CIE94_K2,
};
pub use mse::mse_loss;
pub use regularizers::{monotonicity_loss, smooth_loss, SmoothLoss};
pub use total::{total_loss, LossComponents, LossWeights, PerceptualTerm, TotalLoss};

/// Scalar loss value with the gradient of one input.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<S> {
    pub value: S,
    pub grad: Vec<S>,
}
