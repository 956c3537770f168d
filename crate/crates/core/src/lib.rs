//! Differentiable spatial-aware 3D LUT fusion for image enhancement.
//!
//! A [`LutBank`] holds `T` scenario sets of `M` basic 3D LUTs. A two-head
//! predictor produces a global scenario vector `ω` and a per-pixel category
//! map `α`; every pixel is then mapped by
//! `Σ_t ω_t Σ_m α_m(pixel) · trilinear(lut[t][m], pixel)`.
//!
//! The multilinear core (LUTs, fusion, resampling, apply gradients) is generic
//! over [`Scalar`] and runs on `f32`, `f64` and exact [`Rational64`]. Losses,
//! the predictor and training are generic over [`Real`]. Production code uses
//! the `f32` aliases below; the `f64` aliases back gradient checking.

pub mod apply;
pub mod error;
pub mod formats;
pub mod gradcheck;
pub mod grad;
pub mod image;
pub mod imageio;
pub mod losses;
pub mod lut;
pub mod model;
pub mod predictor;
mod resample;
pub mod wide;
pub mod scalar;
pub mod train;
pub mod weights;

pub use error::{Error, Result};
pub use image::ImagePlane;
pub use lut::{Lut3d, LutBank};
pub use num_rational::Rational64;
pub use scalar::{Real, Scalar};
pub use weights::WeightMap;

pub type Lut = Lut3d<f32>;
pub type Bank = LutBank<f32>;
pub type Image = ImagePlane<f32>;
pub type Weights = WeightMap<f32>;

pub type Lut64 = Lut3d<f64>;
pub type Bank64 = LutBank<f64>;
pub type Image64 = ImagePlane<f64>;
pub type Weights64 = WeightMap<f64>;

pub type ExactLut = Lut3d<Rational64>;
pub type ExactBank = LutBank<Rational64>;
pub type ExactImage = ImagePlane<Rational64>;
pub type ExactWeights = WeightMap<Rational64>;
