use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Drift;

pub const DIVERGENCE_TOL: f64 = 1e-10;
pub const JACOBIAN_TOL: f64 = 1e-5;

/// Outcome of [`validate_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    /// Largest `|div f - trace(∇x f)|` over the samples.
    pub max_divergence_error: f64,
    /// Largest `max|J - J_fd| / max(1, max|J|)` over the samples.
    pub max_jacobian_error: f64,
    pub passed: bool,
}

/// Samples `(t, x)` uniformly from `[0, 10] × [-3, 3]^n` and compares the
/// analytic divergence with the Jacobian trace and the analytic Jacobian
/// with central differences of `f`. Failures are reported, not raised.
pub fn validate_model(drift: &dyn Drift, samples: usize, seed: u64) -> ValidationReport {
    let n = drift.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_div: f64 = 0.0;
    let mut max_jac: f64 = 0.0;
    for _ in 0..samples.max(1) {
        let t = rng.random_range(0.0..10.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let jac = drift.jacobian(t, &x);
        max_div = max_div.max((drift.divergence(t, &x) - jac.trace()).abs());

        let mut err: f64 = 0.0;
        for j in 0..n {
            let h = 1e-6 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let col = (drift.eval(t, &xp) - drift.eval(t, &xm)) / (2.0 * h);
            for i in 0..n {
                err = err.max((col[i] - jac[(i, j)]).abs());
            }
        }
        max_jac = max_jac.max(err / jac.abs().max().max(1.0));
    }
    ValidationReport {
        samples: samples.max(1),
        max_divergence_error: max_div,
        max_jacobian_error: max_jac,
        passed: max_div <= DIVERGENCE_TOL && max_jac <= JACOBIAN_TOL,
    }
}
