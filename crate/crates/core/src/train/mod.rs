//! Optimization: schedule, Adam, metrics, datasets and the training loop.

mod adam;
mod dataset;
mod metrics;
mod schedule;
mod step;
pub mod synthetic;
mod trainer;

pub use adam::{Adam, AdamConfig};
pub use dataset::{is_held_out, Dataset, Pair};
pub use metrics::{format_db, psnr, ssim, SSIM_SIGMA, SSIM_WINDOW};
pub use schedule::cosine_lr;
pub use step::{loss_and_gradients, objective, StepGradients};
pub use trainer::{EpochMetrics, TrainConfig, Trainer};
