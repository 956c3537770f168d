//! Input-independent predictor: free `ω` logits and a free `α` logit grid.

use super::{softmax_backward, softmax_in_place, PredictorOutput};
use crate::error::{invalid_arg, Result};
use crate::scalar::Real;

/// Parameters are the `a×a×M` category logits followed by `T` scenario logits.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPredictor<S> {
    scenarios: usize,
    categories: usize,
    alpha_size: usize,
    params: Vec<S>,
}

fn grid_side(len: usize, scenarios: usize, categories: usize) -> Option<usize> {
    let cells = len.checked_sub(scenarios)?;
    if cells % categories != 0 {
        return None;
    }
    let area = cells / categories;
    let side = (area as f64).sqrt().round() as usize;
    (side > 0 && side * side == area).then_some(side)
}

impl<S: Real> GridPredictor<S> {
    pub const DEFAULT_ALPHA_SIZE: usize = 64;

    /// All-zero logits, so `ω` and `α` start uniform.
    pub fn new(scenarios: usize, categories: usize, alpha_size: usize) -> Result<Self> {
        if scenarios == 0 || categories == 0 || alpha_size == 0 {
            return Err(invalid_arg!("grid predictor needs T, M and size >= 1"));
        }
        Ok(Self {
            scenarios,
            categories,
            alpha_size,
            params: vec![S::zero(); alpha_size * alpha_size * categories + scenarios],
        })
    }

    pub fn from_params(scenarios: usize, categories: usize, params: Vec<S>) -> Result<Self> {
        if scenarios == 0 || categories == 0 {
            return Err(invalid_arg!("grid predictor needs T and M >= 1"));
        }
        let alpha_size = grid_side(params.len(), scenarios, categories).ok_or_else(|| {
            invalid_arg!(
                "{} parameters do not form a square grid for T={scenarios} M={categories}",
                params.len()
            )
        })?;
        Ok(Self {
            scenarios,
            categories,
            alpha_size,
            params,
        })
    }

    pub fn scenarios(&self) -> usize {
        self.scenarios
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn alpha_size(&self) -> usize {
        self.alpha_size
    }

    pub fn params(&self) -> &[S] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        &mut self.params
    }

    fn split(&self) -> usize {
        self.alpha_size * self.alpha_size * self.categories
    }

    pub fn predict(&self) -> PredictorOutput<S> {
        let (alpha_logits, omega_logits) = self.params.split_at(self.split());
        let mut omega = omega_logits.to_vec();
        softmax_in_place(&mut omega);
        let mut alpha = alpha_logits.to_vec();
        alpha.chunks_exact_mut(self.categories).for_each(softmax_in_place);
        PredictorOutput {
            omega_logits: omega_logits.to_vec(),
            omega,
            alpha_logits: alpha_logits.to_vec(),
            alpha,
            alpha_size: self.alpha_size,
        }
    }

    pub(crate) fn backward(
        &self,
        omega: &[S],
        alpha: &[S],
        d_omega: &[S],
        d_alpha: &[S],
    ) -> Result<Vec<S>> {
        let split = self.split();
        if d_omega.len() != self.scenarios || d_alpha.len() != split {
            return Err(invalid_arg!(
                "upstream gradients must have {} and {} entries",
                self.scenarios,
                split
            ));
        }
        let mut grads = vec![S::zero(); self.params.len()];
        let m = self.categories;
        for ((g, y), dy) in grads[..split]
            .chunks_exact_mut(m)
            .zip(alpha.chunks_exact(m))
            .zip(d_alpha.chunks_exact(m))
        {
            softmax_backward(y, dy, g);
        }
        softmax_backward(omega, d_omega, &mut grads[split..]);
        Ok(grads)
    }
}
