//! Scenario and pixel-wise category weights.

use crate::error::{invalid_arg, Result};
use crate::scalar::{cast, Scalar};

/// Tolerance used when checking that weights lie on their simplex.
pub const SIMPLEX_TOLERANCE: f64 = 1e-5;

/// The scenario vector `omega` (length `T`) and the per-pixel category map
/// `alpha` (`H×W×M`, channel-fastest).
///
/// Construction only checks shapes. Gradient checks evaluate the forward map
/// off the simplex, so simplex membership is verified separately through
/// [`WeightMap::check_simplex`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap<S> {
    omega: Vec<S>,
    height: usize,
    width: usize,
    categories: usize,
    alpha: Vec<S>,
}

impl<S: Scalar> WeightMap<S> {
    pub fn new(
        omega: Vec<S>,
        height: usize,
        width: usize,
        categories: usize,
        alpha: Vec<S>,
    ) -> Result<Self> {
        if omega.is_empty() || categories == 0 {
            return Err(invalid_arg!("weight map needs T >= 1 and M >= 1"));
        }
        if alpha.len() != height * width * categories {
            return Err(invalid_arg!(
                "alpha has {} entries, expected {}x{}x{}",
                alpha.len(),
                height,
                width,
                categories
            ));
        }
        Ok(Self {
            omega,
            height,
            width,
            categories,
            alpha,
        })
    }

    /// Uniform weights: `1/T` per scenario and `1/M` per category.
    pub fn uniform(scenarios: usize, categories: usize, height: usize, width: usize) -> Result<Self> {
        if scenarios == 0 || categories == 0 {
            return Err(invalid_arg!("weight map needs T >= 1 and M >= 1"));
        }
        let wt = S::one() / S::from_index(scenarios);
        let wm = S::one() / S::from_index(categories);
        Self::new(
            vec![wt; scenarios],
            height,
            width,
            categories,
            vec![wm; height * width * categories],
        )
    }

    #[inline]
    pub fn omega(&self) -> &[S] {
        &self.omega
    }

    #[inline]
    pub fn omega_mut(&mut self) -> &mut [S] {
        &mut self.omega
    }

    #[inline]
    pub fn alpha(&self) -> &[S] {
        &self.alpha
    }

    #[inline]
    pub fn alpha_mut(&mut self) -> &mut [S] {
        &mut self.alpha
    }

    /// Category weights of pixel `(y, x)`.
    #[inline]
    pub fn alpha_at(&self, y: usize, x: usize) -> &[S] {
        let o = (y * self.width + x) * self.categories;
        &self.alpha[o..o + self.categories]
    }

    #[inline]
    pub fn scenarios(&self) -> usize {
        self.omega.len()
    }

    #[inline]
    pub fn categories(&self) -> usize {
        self.categories
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// Verifies non-negativity and unit sums of `omega` and every pixel of `alpha`.
    pub fn check_simplex(&self) -> Result<()> {
        check_simplex(&self.omega, SIMPLEX_TOLERANCE).map_err(|e| invalid_arg!("omega: {e}"))?;
        for (p, px) in self.alpha.chunks_exact(self.categories).enumerate() {
            check_simplex(px, SIMPLEX_TOLERANCE)
                .map_err(|e| invalid_arg!("alpha at pixel {p}: {e}"))?;
        }
        Ok(())
    }

    pub fn cast<T: Scalar>(&self) -> WeightMap<T> {
        WeightMap {
            omega: self.omega.iter().map(|&v| cast(v)).collect(),
            height: self.height,
            width: self.width,
            categories: self.categories,
            alpha: self.alpha.iter().map(|&v| cast(v)).collect(),
        }
    }
}

/// Checks that `w` is non-negative and sums to one within `tol`.
pub fn check_simplex<S: Scalar>(w: &[S], tol: f64) -> std::result::Result<(), String> {
    if w.is_empty() {
        return Err("empty weight vector".into());
    }
    let mut sum = 0.0;
    for &v in w {
        let f = v.to_f64_lossy();
        if !f.is_finite() || f < -tol {
            return Err(format!("entry {f} is negative or non-finite"));
        }
        sum += f;
    }
    if (sum - 1.0).abs() > tol {
        return Err(format!("weights sum to {sum}, not 1"));
    }
    Ok(())
}
