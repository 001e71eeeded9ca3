use rand::RngExt;
use rand_distr::StandardNormal;

use super::{benes_log_transition, trapezoid};
use crate::simulate::RngStream;

/// `∫ p(x | from; δ) dx` over `[-L, L]` by the trapezoidal rule.
pub fn benes_normalization(from: f64, delta: f64, half_width: f64, points: usize) -> f64 {
    trapezoid(-half_width, half_width, points, |x| benes_log_transition(from, x, delta).exp())
}

/// `count` Euler–Maruyama draws of `X_δ` for `dX = tanh(X) dt + dW`,
/// `X_0 = x0`, with step `h`. All draws come from stream 0 of `seed`.
pub fn benes_em_samples(x0: f64, delta: f64, h: f64, count: usize, seed: u64) -> Vec<f64> {
    let steps = ((delta / h).round() as usize).max(1);
    let dt = delta / steps as f64;
    let s = dt.sqrt();
    let mut rng = RngStream::new(seed, 0).rng();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut x = x0;
        for _ in 0..steps {
            let u: f64 = rng.sample(StandardNormal);
            x += x.tanh() * dt + s * u;
        }
        out.push(x);
    }
    out
}
