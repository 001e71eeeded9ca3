//! Independent reference computations: finite-difference gradients, the
//! linear-Gaussian RTS smoother, exact transition densities, distribution
//! checks and quadrature refinement.
//!
//! Nothing in here is used by the estimation pipeline except the exact
//! transition densities, which back the `exact` merit kind.

mod benes;
mod rts;
mod transition;

use thiserror::Error;

pub use benes::{benes_em_samples, benes_normalization};
pub use rts::{rts_smoother, LinearMeasurement, SmootherOutput};
pub use transition::{
    benes_grad_log_transition, benes_log_transition, benes_transition_cdf, BenesTransition, ExactTransition,
    LinearGaussianSpec, LinearTransition,
};

use crate::functionals::{continuous_energy, continuous_om, QuadratureRule};
use crate::model::{DiscretePath, Diffusion, Drift};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("objective is not finite when probing component {component}")]
    NonFiniteProbe { component: usize },
    #[error("covariance lost positive definiteness at grid index {index}")]
    NotPositiveDefinite { index: usize },
    #[error("measurement instant {time} is not a grid point")]
    MeasurementOffGrid { time: f64 },
}

/// Central-difference gradient with per-component step `h · max(1, |x_i|)`.
pub fn fd_gradient(objective: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Result<Vec<f64>, OracleError> {
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let step = h * x[i].abs().max(1.0);
        probe[i] = x[i] + step;
        let plus = objective(&probe);
        probe[i] = x[i] - step;
        let minus = objective(&probe);
        probe[i] = x[i];
        if !(plus.is_finite() && minus.is_finite()) {
            return Err(OracleError::NonFiniteProbe { component: i });
        }
        grad.push((plus - minus) / (2.0 * step));
    }
    Ok(grad)
}

/// `max_i |a_i - b_i| / max(1, max_i |a_i|)`.
pub fn relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    let scale = analytic.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    analytic
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and
/// `cdf`. Sorts `samples` in place.
pub fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let m = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Composite trapezoid rule on a uniform grid of `points` nodes over `[a, b]`.
pub fn trapezoid(a: f64, b: f64, points: usize, f: impl Fn(f64) -> f64) -> f64 {
    assert!(points >= 2);
    let h = (b - a) / (points - 1) as f64;
    let inner: f64 = (1..points - 1).map(|i| f(a + i as f64 * h)).sum();
    h * (0.5 * f(a) + inner + 0.5 * f(b))
}

/// Comparison of the 3-point and 7-point rules on the same path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureReport {
    pub energy_3: f64,
    pub energy_7: f64,
    pub om_3: f64,
    pub om_7: f64,
}

impl QuadratureReport {
    pub fn energy_difference(&self) -> f64 {
        (self.energy_3 - self.energy_7).abs()
    }

    pub fn om_difference(&self) -> f64 {
        (self.om_3 - self.om_7).abs()
    }
}

/// Evaluates `J` and `J_e` with both rules. Diagnostic only; callers decide
/// what difference is acceptable.
pub fn quadrature_refine_check(path: &DiscretePath, drift: &dyn Drift, diffusion: &Diffusion) -> QuadratureReport {
    let three = QuadratureRule::three_point();
    let seven = QuadratureRule::seven_point();
    QuadratureReport {
        energy_3: continuous_energy(path, drift, diffusion, &three),
        energy_7: continuous_energy(path, drift, diffusion, &seven),
        om_3: continuous_om(path, drift, diffusion, &three),
        om_7: continuous_om(path, drift, diffusion, &seven),
    }
}
