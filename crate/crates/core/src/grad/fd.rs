use crate::error::{invalid_arg, Error, Result};

/// Lower bound of the relative-error denominator.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn central_differences<F>(mut f: F, x: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(invalid_arg!("finite-difference step must be positive, got {step}"));
    }
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let up = f(&probe);
        probe[i] = orig - step;
        let down = f(&probe);
        probe[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!(
                "closure returned {up} / {down} at coordinate {i}"
            )));
        }
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// Maximum relative error between `analytic` and central differences of `f` at `x`.
pub fn finite_diff_check<F>(f: F, x: &[f64], analytic: &[f64], step: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if analytic.len() != x.len() {
        return Err(invalid_arg!(
            "analytic gradient has {} entries for {} parameters",
            analytic.len(),
            x.len()
        ));
    }
    let numeric = central_differences(f, x, step)?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max))
}
