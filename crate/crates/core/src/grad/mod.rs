//! Reverse-mode gradients of the fusion path and the finite-difference oracle.

mod apply;
mod fd;
mod upsample;

pub use apply::{backward_apply, ApplyGradients};
pub use fd::{central_differences, finite_diff_check, relative_error, REL_ERROR_FLOOR};
pub use upsample::{upsample_bilinear, upsample_bilinear_backward};
