use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{dmatrix, dvector, DMatrix, DVector};

use super::{Diffusion, Drift, GaussianDensity, ModelError};

/// `f(x) = tanh(x)`, the scalar Beneš drift.
#[derive(Debug, Clone, Copy, Default)]
pub struct Benes;

impl Drift for Benes {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, _t: f64, x: &[f64]) -> DVector<f64> {
        dvector![x[0].tanh()]
    }

    fn jacobian(&self, _t: f64, x: &[f64]) -> DMatrix<f64> {
        let th = x[0].tanh();
        dmatrix![1.0 - th * th]
    }

    fn divergence(&self, _t: f64, x: &[f64]) -> f64 {
        let th = x[0].tanh();
        1.0 - th * th
    }

    fn jacobian_derivative(&self, _t: f64, x: &[f64], _k: usize) -> DMatrix<f64> {
        let th = x[0].tanh();
        dmatrix![-2.0 * th * (1.0 - th * th)]
    }

    fn time_derivative(&self, _t: f64, _x: &[f64]) -> DVector<f64> {
        dvector![0.0]
    }
}

/// Van der Pol oscillator with state `(u, v)`:
/// `f = (v, -u + μ(1 - u²)v)`.
#[derive(Debug, Clone, Copy)]
pub struct VanDerPol {
    pub mu: f64,
}

impl Default for VanDerPol {
    fn default() -> Self {
        VanDerPol { mu: 2.0 }
    }
}

impl Drift for VanDerPol {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, _t: f64, x: &[f64]) -> DVector<f64> {
        let (u, v) = (x[0], x[1]);
        dvector![v, -u + self.mu * (1.0 - u * u) * v]
    }

    fn jacobian(&self, _t: f64, x: &[f64]) -> DMatrix<f64> {
        let (u, v) = (x[0], x[1]);
        dmatrix![
            0.0, 1.0;
            -1.0 - 2.0 * self.mu * u * v, self.mu * (1.0 - u * u)
        ]
    }

    fn divergence(&self, _t: f64, x: &[f64]) -> f64 {
        self.mu * (1.0 - x[0] * x[0])
    }

    fn jacobian_derivative(&self, _t: f64, x: &[f64], k: usize) -> DMatrix<f64> {
        let (u, v) = (x[0], x[1]);
        let m = self.mu;
        match k {
            0 => dmatrix![0.0, 0.0; -2.0 * m * v, -2.0 * m * u],
            _ => dmatrix![0.0, 0.0; -2.0 * m * u, 0.0],
        }
    }

    fn time_derivative(&self, _t: f64, _x: &[f64]) -> DVector<f64> {
        DVector::zeros(2)
    }
}

/// Linear drift `f(x) = -rate · x` in any dimension.
#[derive(Debug, Clone, Copy)]
pub struct OrnsteinUhlenbeck {
    pub rate: f64,
    pub dim: usize,
}

impl Drift for OrnsteinUhlenbeck {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, _t: f64, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len(), x.iter().map(|xi| -self.rate * xi))
    }

    fn jacobian(&self, _t: f64, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * -self.rate
    }

    fn divergence(&self, _t: f64, _x: &[f64]) -> f64 {
        -self.rate * self.dim as f64
    }

    fn jacobian_derivative(&self, _t: f64, _x: &[f64], _k: usize) -> DMatrix<f64> {
        DMatrix::zeros(self.dim, self.dim)
    }

    fn time_derivative(&self, _t: f64, _x: &[f64]) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
}

/// Identifier of a shipped model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelName {
    Benes,
    VanDerPol,
    OrnsteinUhlenbeck,
}

impl ModelName {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Benes => "benes",
            ModelName::VanDerPol => "vdp",
            ModelName::OrnsteinUhlenbeck => "ou",
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "benes" => Ok(ModelName::Benes),
            "vdp" => Ok(ModelName::VanDerPol),
            "ou" => Ok(ModelName::OrnsteinUhlenbeck),
            other => Err(ModelError::UnknownModel(other.to_string())),
        }
    }
}

/// Overridable constants of the shipped models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Variance of the Beneš initial state.
    pub benes_initial_variance: f64,
    /// Per-component variance of the Van der Pol initial state.
    pub vdp_initial_variance: f64,
    /// Diagonal of the Van der Pol diffusion matrix.
    pub vdp_diffusion: f64,
    /// Decay rate `a` of the OU drift `-a x`.
    pub ou_rate: f64,
    /// Variance of the OU initial state.
    pub ou_initial_variance: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            benes_initial_variance: 0.16,
            vdp_initial_variance: 0.01,
            vdp_diffusion: 0.1,
            ou_rate: 1.0,
            ou_initial_variance: 1.0,
        }
    }
}

/// Dynamics, diffusion and initial law of a model.
#[derive(Clone)]
pub struct ModelParts {
    pub drift: Arc<dyn Drift>,
    pub diffusion: Diffusion,
    pub initial: Arc<GaussianDensity>,
}

impl fmt::Debug for ModelParts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelParts")
            .field("dim", &self.drift.dim())
            .field("diffusion", &self.diffusion)
            .field("initial", &self.initial)
            .finish()
    }
}

pub fn builtin_model(name: ModelName, params: &ModelParams) -> Result<ModelParts, ModelError> {
    let parts = match name {
        ModelName::Benes => ModelParts {
            drift: Arc::new(Benes),
            diffusion: Diffusion::scaled_identity(1, 1.0)?,
            initial: Arc::new(GaussianDensity::isotropic(1, params.benes_initial_variance)?),
        },
        ModelName::VanDerPol => ModelParts {
            drift: Arc::new(VanDerPol::default()),
            diffusion: Diffusion::scaled_identity(2, params.vdp_diffusion)?,
            initial: Arc::new(GaussianDensity::isotropic(2, params.vdp_initial_variance)?),
        },
        ModelName::OrnsteinUhlenbeck => {
            if !(params.ou_rate > 0.0) {
                return Err(ModelError::InvalidParameter(format!(
                    "OU rate must be positive, got {}",
                    params.ou_rate
                )));
            }
            ModelParts {
                drift: Arc::new(OrnsteinUhlenbeck { rate: params.ou_rate, dim: 1 }),
                diffusion: Diffusion::scaled_identity(1, 1.0)?,
                initial: Arc::new(GaussianDensity::isotropic(1, params.ou_initial_variance)?),
            }
        }
    };
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InitialDensity;

    #[test]
    fn benes_values() {
        let m = builtin_model(ModelName::Benes, &ModelParams::default()).unwrap();
        assert_eq!(m.drift.eval(0.0, &[0.0])[0], 0.0);
        for x in [-2.0, -0.3, 0.0, 1.7] {
            let th: f64 = f64::tanh(x);
            assert_eq!(m.drift.divergence(0.0, &[x]), 1.0 - th * th);
        }
        assert!((m.initial.log_density(&[0.0]) + 0.5 * (2.0 * std::f64::consts::PI * 0.16).ln()).abs() < 1e-14);
    }

    #[test]
    fn vdp_values() {
        let m = builtin_model(ModelName::VanDerPol, &ModelParams::default()).unwrap();
        assert_eq!(m.drift.divergence(0.0, &[0.0, 0.0]), 2.0);
        assert_eq!(m.diffusion.g(), &(DMatrix::identity(2, 2) * 0.1));
        let f = m.drift.eval(0.0, &[0.5, 1.0]);
        assert_eq!(f.as_slice(), &[1.0, -0.5 + 2.0 * 0.75]);
    }

    #[test]
    fn ou_values() {
        let params = ModelParams { ou_rate: 2.5, ..Default::default() };
        let m = builtin_model(ModelName::OrnsteinUhlenbeck, &params).unwrap();
        assert_eq!(m.drift.eval(0.0, &[2.0])[0], -5.0);
        let bad = ModelParams { ou_rate: 0.0, ..Default::default() };
        assert!(builtin_model(ModelName::OrnsteinUhlenbeck, &bad).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!("vdp".parse::<ModelName>().unwrap(), ModelName::VanDerPol);
        assert!(matches!("lorenz".parse::<ModelName>(), Err(ModelError::UnknownModel(_))));
    }
}
