use crate::error::{invalid_arg, Error, Result};
use crate::scalar::{cast, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam over one flat parameter space that may be split
/// into several slices (LUT cells, predictor parameters).
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<S> {
    pub config: AdamConfig,
    m: Vec<S>,
    v: Vec<S>,
    t: u64,
}

impl<S: Real> Adam<S> {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        Self {
            config,
            m: vec![S::zero(); len],
            v: vec![S::zero(); len],
            t: 0,
        }
    }

    pub fn from_state(config: AdamConfig, m: Vec<S>, v: Vec<S>, t: u64) -> Result<Self> {
        if m.len() != v.len() {
            return Err(invalid_arg!("moment buffers differ in length"));
        }
        Ok(Self { config, m, v, t })
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&[S], &[S]) {
        (&self.m, &self.v)
    }

    /// One update. `parts` pairs each parameter slice with its gradient; the
    /// slices are laid end to end in the moment buffers. A non-finite
    /// gradient rejects the whole step before anything is modified.
    pub fn step(&mut self, lr: f64, parts: &mut [(&mut [S], &[S])]) -> Result<()> {
        let total: usize = parts.iter().map(|(p, _)| p.len()).sum();
        if total != self.m.len() {
            return Err(invalid_arg!(
                "optimizer tracks {} parameters, step has {total}",
                self.m.len()
            ));
        }
        let mut offset = 0;
        for (p, g) in parts.iter() {
            if p.len() != g.len() {
                return Err(invalid_arg!("gradient slice has the wrong length"));
            }
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient entry {} is {:?} at optimizer step {}",
                    offset + i,
                    g[i],
                    self.t + 1
                )));
            }
            offset += p.len();
        }
        self.t += 1;
        let AdamConfig { beta1, beta2, epsilon } = self.config;
        let b1: S = cast(beta1);
        let b2: S = cast(beta2);
        let c1: S = cast(1.0 - beta1);
        let c2: S = cast(1.0 - beta2);
        let bias1: S = cast(1.0 - beta1.powi(self.t.min(i32::MAX as u64) as i32));
        let bias2: S = cast(1.0 - beta2.powi(self.t.min(i32::MAX as u64) as i32));
        let lr: S = cast(lr);
        let eps: S = cast(epsilon);
        let mut offset = 0;
        for (p, g) in parts.iter_mut() {
            let m = &mut self.m[offset..offset + p.len()];
            let v = &mut self.v[offset..offset + p.len()];
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + c1 * gi;
                v[i] = b2 * v[i] + c2 * gi * gi;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
            offset += p.len();
        }
        Ok(())
    }
}
