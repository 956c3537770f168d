use std::f64::consts::PI;

/// Cosine annealing with warm restarts:
/// `amplitude · ½ · (1 + cos(π · (step mod P) / P))`, `P = period · steps_per_epoch`.
pub fn cosine_lr(step: u64, steps_per_epoch: u64, amplitude: f64, period_epochs: u64) -> f64 {
    let p = period_epochs.saturating_mul(steps_per_epoch).max(1);
    let phase = (step % p) as f64 / p as f64;
    amplitude * 0.5 * (1.0 + (PI * phase).cos())
}
