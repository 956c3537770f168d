//! Weight predictors: map a downsampled input image to the scenario vector
//! `ω` and a low-resolution category map `α`.

mod conv;
mod grid;
mod net;

pub use grid::GridPredictor;
pub use net::{ConvArch, ConvPredictor, ForwardTape, HeadInit};

use crate::error::{invalid_arg, Error, Result};
use crate::image::ImagePlane;
use crate::scalar::Real;

/// Numerically stable softmax over a slice.
pub fn softmax_in_place<S: Real>(v: &mut [S]) {
    let max = v.iter().copied().fold(S::neg_infinity(), S::max);
    let mut sum = S::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum = sum + *x;
    }
    for x in v.iter_mut() {
        *x = *x / sum;
    }
}

/// Given softmax output `y` and upstream `dy`, writes `∂L/∂logits`.
pub fn softmax_backward<S: Real>(y: &[S], dy: &[S], out: &mut [S]) {
    let dot = y.iter().zip(dy).fold(S::zero(), |a, (&p, &g)| a + p * g);
    for ((o, &p), &g) in out.iter_mut().zip(y).zip(dy) {
        *o = p * (g - dot);
    }
}

/// Both heads of a predictor for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorOutput<S> {
    pub omega_logits: Vec<S>,
    pub omega: Vec<S>,
    /// `alpha_size × alpha_size × M`, channel-fastest.
    pub alpha_logits: Vec<S>,
    pub alpha: Vec<S>,
    pub alpha_size: usize,
}

/// Recorded state needed for a backward pass.
#[derive(Debug, Clone)]
pub enum PredictorTape<S> {
    Conv(Box<ForwardTape<S>>),
    Grid { omega: Vec<S>, alpha: Vec<S> },
}

/// Architecture identifiers used in serialized bundles.
pub const ARCH_CONV: u16 = 1;
pub const ARCH_GRID: u16 = 2;

/// Either predictor kind behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor<S> {
    Conv(ConvPredictor<S>),
    Grid(GridPredictor<S>),
}

impl<S: Real> Predictor<S> {
    pub fn scenarios(&self) -> usize {
        match self {
            Predictor::Conv(p) => p.arch().scenarios,
            Predictor::Grid(p) => p.scenarios(),
        }
    }

    pub fn categories(&self) -> usize {
        match self {
            Predictor::Conv(p) => p.arch().categories,
            Predictor::Grid(p) => p.categories(),
        }
    }

    /// Required square input size; `None` when the input is ignored.
    pub fn input_size(&self) -> Option<usize> {
        match self {
            Predictor::Conv(p) => Some(p.arch().input_size),
            Predictor::Grid(_) => None,
        }
    }

    pub fn alpha_size(&self) -> usize {
        match self {
            Predictor::Conv(p) => p.arch().alpha_size(),
            Predictor::Grid(p) => p.alpha_size(),
        }
    }

    pub fn arch_id(&self) -> u16 {
        match self {
            Predictor::Conv(_) => ARCH_CONV,
            Predictor::Grid(_) => ARCH_GRID,
        }
    }

    pub fn params(&self) -> &[S] {
        match self {
            Predictor::Conv(p) => p.params(),
            Predictor::Grid(p) => p.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        match self {
            Predictor::Conv(p) => p.params_mut(),
            Predictor::Grid(p) => p.params_mut(),
        }
    }

    /// Forward pass that also records what the backward pass needs.
    pub fn forward(&self, input: &ImagePlane<S>) -> Result<(PredictorOutput<S>, PredictorTape<S>)> {
        match self {
            Predictor::Conv(p) => {
                let (out, tape) = p.forward(input)?;
                Ok((out, PredictorTape::Conv(Box::new(tape))))
            }
            Predictor::Grid(p) => {
                let out = p.predict();
                let tape = PredictorTape::Grid {
                    omega: out.omega.clone(),
                    alpha: out.alpha.clone(),
                };
                Ok((out, tape))
            }
        }
    }

    pub fn predict(&self, input: &ImagePlane<S>) -> Result<PredictorOutput<S>> {
        match self {
            Predictor::Conv(p) => p.forward(input).map(|(o, _)| o),
            Predictor::Grid(p) => Ok(p.predict()),
        }
    }

    /// Parameter gradients for upstream gradients of `ω` and low-resolution `α`.
    pub fn backward(&self, tape: &PredictorTape<S>, d_omega: &[S], d_alpha: &[S]) -> Result<Vec<S>> {
        match (self, tape) {
            (Predictor::Conv(p), PredictorTape::Conv(t)) => p.backward(t, d_omega, d_alpha),
            (Predictor::Grid(p), PredictorTape::Grid { omega, alpha }) => {
                p.backward(omega, alpha, d_omega, d_alpha)
            }
            _ => Err(Error::InvalidState("tape was recorded by a different predictor".into())),
        }
    }

    /// Rebuilds a predictor from a serialized architecture id and parameters.
    pub fn from_parts(
        arch_id: u16,
        scenarios: usize,
        categories: usize,
        params: Vec<S>,
    ) -> Result<Self> {
        match arch_id {
            ARCH_CONV => Ok(Predictor::Conv(ConvPredictor::from_params(
                ConvArch::standard(scenarios, categories),
                params,
            )?)),
            ARCH_GRID => Ok(Predictor::Grid(GridPredictor::from_params(
                scenarios, categories, params,
            )?)),
            other => Err(invalid_arg!("unknown predictor architecture id {other}")),
        }
    }

    pub fn cast<D: Real>(&self) -> Predictor<D> {
        let params: Vec<D> = self.params().iter().map(|&v| crate::scalar::cast(v)).collect();
        match self {
            Predictor::Conv(p) => Predictor::Conv(
                ConvPredictor::from_params(*p.arch(), params).expect("same architecture"),
            ),
            Predictor::Grid(p) => Predictor::Grid(
                GridPredictor::from_params(p.scenarios(), p.categories(), params)
                    .expect("same shape"),
            ),
        }
    }
}
