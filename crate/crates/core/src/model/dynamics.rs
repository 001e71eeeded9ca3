use nalgebra::{DMatrix, DVector};

use super::ModelError;

/// Step used by the finite-difference fallbacks of [`Drift`].
pub const FD_FALLBACK_STEP: f64 = 1e-6;

/// Drift vector field `f(t, x)` of `dX = f(t, X) dt + G dW`.
///
/// Implementations supply the Jacobian `∇x f` and the divergence
/// analytically. The derivative of the Jacobian with respect to a state
/// component (needed by the trapezoidal log-determinant gradient and the
/// order-1.5 integrator) and the time derivative fall back to central
/// differences when not overridden.
pub trait Drift: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, t: f64, x: &[f64]) -> DVector<f64>;

    /// `jac[(i, j)] = ∂f_i / ∂x_j`.
    fn jacobian(&self, t: f64, x: &[f64]) -> DMatrix<f64>;

    fn divergence(&self, t: f64, x: &[f64]) -> f64;

    /// `∂(∇x f) / ∂x_k`, i.e. entries `∂²f_i / ∂x_j ∂x_k`.
    fn jacobian_derivative(&self, t: f64, x: &[f64], k: usize) -> DMatrix<f64> {
        let h = FD_FALLBACK_STEP * x[k].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        (self.jacobian(t, &xp) - self.jacobian(t, &xm)) / (2.0 * h)
    }

    /// `∂f / ∂t`.
    fn time_derivative(&self, t: f64, x: &[f64]) -> DVector<f64> {
        let h = FD_FALLBACK_STEP * t.abs().max(1.0);
        (self.eval(t + h, x) - self.eval(t - h, x)) / (2.0 * h)
    }
}

/// Constant full-rank diffusion matrix `G` with `Q = (G Gᵀ)⁻¹` cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Diffusion {
    g: DMatrix<f64>,
    q: DMatrix<f64>,
    log_abs_det_g: f64,
}

impl Diffusion {
    pub fn new(g: DMatrix<f64>) -> Result<Self, ModelError> {
        if !g.is_square() || g.nrows() == 0 {
            return Err(ModelError::SingularDiffusion);
        }
        let det = g.clone().lu().determinant();
        if !(det.is_finite() && det.abs() > f64::MIN_POSITIVE) {
            return Err(ModelError::SingularDiffusion);
        }
        let ggt = &g * g.transpose();
        let q = ggt
            .cholesky()
            .ok_or(ModelError::SingularDiffusion)?
            .inverse();
        Ok(Diffusion { g, q, log_abs_det_g: det.abs().ln() })
    }

    /// `G = scale · I_n`.
    pub fn scaled_identity(n: usize, scale: f64) -> Result<Self, ModelError> {
        Self::new(DMatrix::identity(n, n) * scale)
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn log_abs_det_g(&self) -> f64 {
        self.log_abs_det_g
    }

    /// `Q v`.
    pub fn weight(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.q * v
    }

    /// `‖v‖²_Q = vᵀ Q v`.
    pub fn sq_norm(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.q * v))
    }
}
