use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use statrs::function::erf::erfc;

use super::OracleError;

/// Exact transition log-density `ln p(x_{k+1} | x_k; δ)` of an SDE whose
/// transition law is known in closed form.
pub trait ExactTransition: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn log_transition(&self, t: f64, delta: f64, from: &[f64], to: &[f64]) -> f64;
    /// Gradients with respect to `from` and `to`.
    fn grad_log_transition(&self, t: f64, delta: f64, from: &[f64], to: &[f64]) -> (DVector<f64>, DVector<f64>);
}

fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Exact transition log-density of `dX = tanh(X) dt + dW`:
///
/// `ln p(x₁ | x₀; δ) = ln cosh x₁ - ln cosh x₀ - δ/2 - (x₁ - x₀)²/(2δ) - ½ ln(2πδ)`.
///
/// Follows from Girsanov's theorem with potential `ln cosh`, for which
/// `½(tanh² + tanh') ≡ ½`.
pub fn benes_log_transition(from: f64, to: f64, delta: f64) -> f64 {
    let d = to - from;
    ln_cosh(to) - ln_cosh(from) - 0.5 * delta - d * d / (2.0 * delta) - 0.5 * (2.0 * PI * delta).ln()
}

/// `(∂/∂from, ∂/∂to)` of [`benes_log_transition`].
pub fn benes_grad_log_transition(from: f64, to: f64, delta: f64) -> (f64, f64) {
    let d = (to - from) / delta;
    (-from.tanh() + d, to.tanh() - d)
}

/// CDF of the Beneš transition law. The density is the two-component
/// Gaussian mixture `[e^{x₀} N(x₀ + δ, δ) + e^{-x₀} N(x₀ - δ, δ)] / (2 cosh x₀)`.
pub fn benes_transition_cdf(from: f64, delta: f64, x: f64) -> f64 {
    let s = delta.sqrt();
    // weights e^{±x₀} / (2 cosh x₀) written without overflow
    let w_plus = 1.0 / (1.0 + (-2.0 * from).exp());
    let w_minus = 1.0 - w_plus;
    w_plus * std_normal_cdf((x - from - delta) / s) + w_minus * std_normal_cdf((x - from + delta) / s)
}

/// [`ExactTransition`] for the Beneš SDE.
#[derive(Debug, Clone, Copy, Default)]
pub struct BenesTransition;

impl ExactTransition for BenesTransition {
    fn dim(&self) -> usize {
        1
    }

    fn log_transition(&self, _t: f64, delta: f64, from: &[f64], to: &[f64]) -> f64 {
        benes_log_transition(from[0], to[0], delta)
    }

    fn grad_log_transition(&self, _t: f64, delta: f64, from: &[f64], to: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let (a, b) = benes_grad_log_transition(from[0], to[0], delta);
        (DVector::from_element(1, a), DVector::from_element(1, b))
    }
}

/// Linear-Gaussian SDE `dX = A X dt + G dW` with diagonal `A`, plus a
/// Gaussian initial law.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianSpec {
    /// Diagonal of `A`.
    pub drift_diag: Vec<f64>,
    pub g: DMatrix<f64>,
    pub init_mean: DVector<f64>,
    pub init_cov: DMatrix<f64>,
}

impl LinearGaussianSpec {
    /// Scalar Ornstein–Uhlenbeck `dX = -rate X dt + σ dW`, `X₀ ~ N(0, v₀)`.
    pub fn ou(rate: f64, sigma: f64, initial_variance: f64) -> Self {
        LinearGaussianSpec {
            drift_diag: vec![-rate],
            g: DMatrix::from_element(1, 1, sigma),
            init_mean: DVector::zeros(1),
            init_cov: DMatrix::from_element(1, 1, initial_variance),
        }
    }

    pub fn dim(&self) -> usize {
        self.drift_diag.len()
    }

    /// `exp(A δ)`.
    pub fn transition_matrix(&self, delta: f64) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim(),
            self.drift_diag.iter().map(|a| (a * delta).exp()),
        ))
    }

    /// `∫₀^δ e^{Aτ} G Gᵀ e^{Aᵀτ} dτ`, entrywise `S_ij (e^{(a_i + a_j)δ} - 1)/(a_i + a_j)`.
    pub fn transition_covariance(&self, delta: f64) -> DMatrix<f64> {
        let s = &self.g * self.g.transpose();
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            let rate = self.drift_diag[i] + self.drift_diag[j];
            let factor = if rate.abs() * delta < 1e-12 { delta } else { (rate * delta).exp_m1() / rate };
            s[(i, j)] * factor
        })
    }
}

/// Exact Gaussian transitions of a [`LinearGaussianSpec`].
#[derive(Debug, Clone)]
pub struct LinearTransition {
    spec: LinearGaussianSpec,
}

impl LinearTransition {
    pub fn new(spec: LinearGaussianSpec) -> Self {
        LinearTransition { spec }
    }

    fn residual(&self, delta: f64, from: &[f64], to: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>, f64), OracleError> {
        let phi = self.spec.transition_matrix(delta);
        let cov = self.spec.transition_covariance(delta);
        let r = DVector::from_column_slice(to) - &phi * DVector::from_column_slice(from);
        let chol = cov.cholesky().ok_or(OracleError::NotPositiveDefinite { index: 0 })?;
        let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        Ok((phi, r, chol.inverse(), log_det))
    }
}

impl ExactTransition for LinearTransition {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn log_transition(&self, _t: f64, delta: f64, from: &[f64], to: &[f64]) -> f64 {
        match self.residual(delta, from, to) {
            Ok((_, r, prec, log_det)) => {
                let n = r.len() as f64;
                -0.5 * (n * (2.0 * PI).ln() + log_det) - 0.5 * r.dot(&(&prec * &r))
            }
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn grad_log_transition(&self, _t: f64, delta: f64, from: &[f64], to: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let (phi, r, prec, _) = self
            .residual(delta, from, to)
            .expect("transition covariance checked by log_transition");
        let w = &prec * r;
        (phi.transpose() * &w, -w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benes_single_step_value() {
        let v = benes_log_transition(0.0, 0.0, 1.0);
        assert!((v - (-0.5 - 0.5 * (2.0 * PI).ln())).abs() < 1e-14);
        assert!((v + 1.418939).abs() < 1e-6);
    }

    #[test]
    fn ln_cosh_is_stable() {
        assert!((ln_cosh(0.3) - 0.3f64.cosh().ln()).abs() < 1e-15);
        assert!((ln_cosh(800.0) - (800.0 - std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn cdf_limits() {
        assert!(benes_transition_cdf(1.0, 0.5, -40.0) < 1e-12);
        assert!((benes_transition_cdf(1.0, 0.5, 40.0) - 1.0).abs() < 1e-12);
        assert!((benes_transition_cdf(0.0, 1.0, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ou_transition_moments() {
        let spec = LinearGaussianSpec::ou(2.0, 1.5, 1.0);
        let c = spec.transition_covariance(0.3)[(0, 0)];
        assert!((c - 2.25 * (1.0 - (-1.2f64).exp()) / 4.0).abs() < 1e-14);
        assert!((spec.transition_matrix(0.3)[(0, 0)] - (-0.6f64).exp()).abs() < 1e-15);
    }
}
