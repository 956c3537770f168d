//! 3D lookup tables and trilinear sampling.
//!
//! Cells are stored as contiguous RGB triples in red-major order: the cell at
//! lattice coordinate `(i, j, k)` (red, green, blue) starts at
//! `((i * N + j) * N + k) * 3`. Blue is therefore the fastest-varying index in
//! memory. The bundle format writes cells in exactly this order.

use crate::error::{invalid_arg, Result};
use crate::scalar::{cast, Scalar};

/// Default lattice resolution per channel.
pub const DEFAULT_BINS: usize = 33;
/// Default number of scenario LUT sets.
pub const DEFAULT_SCENARIOS: usize = 3;
/// Default number of basic LUTs per scenario.
pub const DEFAULT_CATEGORIES: usize = 10;

/// One `N×N×N` lattice of output RGB colors.
#[derive(Debug, Clone, PartialEq)]
pub struct Lut3d<S> {
    n_bins: usize,
    values: Vec<S>,
}

impl<S: Scalar> Lut3d<S> {
    /// Lattice whose cell `(i, j, k)` holds `(i, j, k) / (N - 1)`.
    pub fn identity(n_bins: usize) -> Result<Self> {
        check_bins(n_bins)?;
        let denom = S::from_index(n_bins - 1);
        let ramp: Vec<S> = (0..n_bins).map(|i| S::from_index(i) / denom).collect();
        let mut values = Vec::with_capacity(n_bins * n_bins * n_bins * 3);
        for i in 0..n_bins {
            for j in 0..n_bins {
                for k in 0..n_bins {
                    values.extend_from_slice(&[ramp[i], ramp[j], ramp[k]]);
                }
            }
        }
        Ok(Self { n_bins, values })
    }

    pub fn constant(n_bins: usize, rgb: [S; 3]) -> Result<Self> {
        check_bins(n_bins)?;
        let cells = n_bins * n_bins * n_bins;
        let mut values = Vec::with_capacity(cells * 3);
        for _ in 0..cells {
            values.extend_from_slice(&rgb);
        }
        Ok(Self { n_bins, values })
    }

    pub fn from_values(n_bins: usize, values: Vec<S>) -> Result<Self> {
        check_bins(n_bins)?;
        let expected = n_bins * n_bins * n_bins * 3;
        if values.len() != expected {
            return Err(invalid_arg!(
                "LUT of {} bins needs {} values, got {}",
                n_bins,
                expected,
                values.len()
            ));
        }
        Ok(Self { n_bins, values })
    }

    /// Builds a LUT by evaluating `f(i, j, k)` at every lattice cell.
    pub fn from_fn(n_bins: usize, mut f: impl FnMut(usize, usize, usize) -> [S; 3]) -> Result<Self> {
        check_bins(n_bins)?;
        let mut values = Vec::with_capacity(n_bins * n_bins * n_bins * 3);
        for i in 0..n_bins {
            for j in 0..n_bins {
                for k in 0..n_bins {
                    values.extend_from_slice(&f(i, j, k));
                }
            }
        }
        Ok(Self { n_bins, values })
    }

    #[inline]
    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    #[inline]
    pub fn values(&self) -> &[S] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    /// Offset of the first component of cell `(i, j, k)`.
    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        ((i * self.n_bins + j) * self.n_bins + k) * 3
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize, k: usize) -> [S; 3] {
        let o = self.offset(i, j, k);
        [self.values[o], self.values[o + 1], self.values[o + 2]]
    }

    #[inline]
    pub fn set_cell(&mut self, i: usize, j: usize, k: usize, rgb: [S; 3]) {
        let o = self.offset(i, j, k);
        self.values[o..o + 3].copy_from_slice(&rgb);
    }

    /// Trilinear interpolation of the 8 cells around `color * (N - 1)`.
    ///
    /// Components outside `[0, 1]` are clamped first; NaN is rejected.
    pub fn sample(&self, color: [S; 3]) -> Result<[S; 3]> {
        let corners = Corners::locate(self.n_bins, color)?;
        Ok(self.sample_at(&corners))
    }

    /// Evaluates precomputed corner offsets and weights against this LUT.
    #[inline]
    pub fn sample_at(&self, corners: &Corners<S>) -> [S; 3] {
        let v = &self.values;
        let mut out = [S::zero(); 3];
        for c in 0..8 {
            let o = corners.offsets[c];
            let w = corners.weights[c];
            out[0] = out[0] + w * v[o];
            out[1] = out[1] + w * v[o + 1];
            out[2] = out[2] + w * v[o + 2];
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite_value())
    }

    pub fn cast<T: Scalar>(&self) -> Lut3d<T> {
        Lut3d {
            n_bins: self.n_bins,
            values: self.values.iter().map(|&v| cast(v)).collect(),
        }
    }
}

fn check_bins(n_bins: usize) -> Result<()> {
    if n_bins < 2 {
        return Err(invalid_arg!("LUT needs at least 2 bins per channel, got {n_bins}"));
    }
    Ok(())
}

/// The 8 lattice cells around a color and their trilinear weights.
///
/// Corner `c` has lattice offset `(c >> 2, (c >> 1) & 1, c & 1)` from the
/// lower cell; its weight is `(w_r * w_g) * w_b`.
#[derive(Debug, Clone, Copy)]
pub struct Corners<S> {
    pub offsets: [usize; 8],
    pub weights: [S; 8],
}

impl<S: Scalar> Corners<S> {
    pub fn locate(n_bins: usize, color: [S; 3]) -> Result<Self> {
        if color.iter().any(|c| c.is_nan_value()) {
            return Err(invalid_arg!("NaN color component {:?}", color));
        }
        let scale = S::from_index(n_bins - 1);
        let mut lower = [0usize; 3];
        let mut frac = [S::zero(); 3];
        for ch in 0..3 {
            let pos = color[ch].clamp_unit() * scale;
            let i = pos.floor_index().min(n_bins - 2);
            lower[ch] = i;
            frac[ch] = pos - S::from_index(i);
        }
        let n = n_bins;
        let base = ((lower[0] * n + lower[1]) * n + lower[2]) * 3;
        let step = [n * n * 3, n * 3, 3];
        let axis = |ch: usize, bit: usize| if bit == 1 { frac[ch] } else { S::one() - frac[ch] };
        let mut offsets = [0usize; 8];
        let mut weights = [S::zero(); 8];
        for c in 0..8 {
            let (di, dj, dk) = (c >> 2, (c >> 1) & 1, c & 1);
            offsets[c] = base + di * step[0] + dj * step[1] + dk * step[2];
            weights[c] = axis(0, di) * axis(1, dj) * axis(2, dk);
        }
        Ok(Self { offsets, weights })
    }
}

/// `T` scenario sets of `M` basic LUTs, all with the same resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct LutBank<S> {
    scenarios: usize,
    categories: usize,
    luts: Vec<Lut3d<S>>,
}

impl<S: Scalar> LutBank<S> {
    pub fn identity(scenarios: usize, categories: usize, n_bins: usize) -> Result<Self> {
        let lut = Lut3d::identity(n_bins)?;
        Self::from_luts(scenarios, categories, vec![lut; scenarios * categories])
    }

    /// Builds a bank from LUTs listed scenario-major (`t * M + m`).
    pub fn from_luts(scenarios: usize, categories: usize, luts: Vec<Lut3d<S>>) -> Result<Self> {
        if scenarios == 0 || categories == 0 {
            return Err(invalid_arg!(
                "bank needs T >= 1 and M >= 1, got T={scenarios} M={categories}"
            ));
        }
        if luts.len() != scenarios * categories {
            return Err(invalid_arg!(
                "bank of T={scenarios} M={categories} needs {} LUTs, got {}",
                scenarios * categories,
                luts.len()
            ));
        }
        let n = luts[0].n_bins();
        if luts.iter().any(|l| l.n_bins() != n) {
            return Err(invalid_arg!("all LUTs in a bank must share one resolution"));
        }
        Ok(Self {
            scenarios,
            categories,
            luts,
        })
    }

    #[inline]
    pub fn scenarios(&self) -> usize {
        self.scenarios
    }

    #[inline]
    pub fn categories(&self) -> usize {
        self.categories
    }

    #[inline]
    pub fn n_bins(&self) -> usize {
        self.luts[0].n_bins()
    }

    /// Number of scalars in one LUT (`N³ × 3`).
    #[inline]
    pub fn lut_len(&self) -> usize {
        self.luts[0].values().len()
    }

    #[inline]
    pub fn lut(&self, t: usize, m: usize) -> &Lut3d<S> {
        &self.luts[t * self.categories + m]
    }

    #[inline]
    pub fn lut_mut(&mut self, t: usize, m: usize) -> &mut Lut3d<S> {
        &mut self.luts[t * self.categories + m]
    }

    /// The `M` basic LUTs of scenario `t`.
    pub fn row(&self, t: usize) -> &[Lut3d<S>] {
        &self.luts[t * self.categories..(t + 1) * self.categories]
    }

    pub fn luts(&self) -> &[Lut3d<S>] {
        &self.luts
    }

    pub fn luts_mut(&mut self) -> &mut [Lut3d<S>] {
        &mut self.luts
    }

    pub fn all_finite(&self) -> bool {
        self.luts.iter().all(Lut3d::all_finite)
    }

    pub fn cast<T: Scalar>(&self) -> LutBank<T> {
        LutBank {
            scenarios: self.scenarios,
            categories: self.categories,
            luts: self.luts.iter().map(Lut3d::cast).collect(),
        }
    }

    /// All cells of all LUTs concatenated scenario-major.
    pub fn flat_values(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.luts.len() * self.lut_len());
        for l in &self.luts {
            out.extend_from_slice(l.values());
        }
        out
    }

    /// Inverse of [`LutBank::flat_values`].
    pub fn set_flat_values(&mut self, flat: &[S]) -> Result<()> {
        let len = self.lut_len();
        if flat.len() != len * self.luts.len() {
            return Err(invalid_arg!(
                "flat bank has {} values, expected {}",
                flat.len(),
                len * self.luts.len()
            ));
        }
        for (lut, chunk) in self.luts.iter_mut().zip(flat.chunks_exact(len)) {
            lut.values_mut().copy_from_slice(chunk);
        }
        Ok(())
    }
}
