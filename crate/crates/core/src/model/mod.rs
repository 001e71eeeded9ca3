//! Problem data: dynamics, diffusion, initial density, measurement
//! likelihoods and time partitions, plus the shipped Beneš, Van der Pol and
//! Ornstein–Uhlenbeck models.

mod builtin;
mod density;
mod dynamics;
mod grid;
mod path;
mod validate;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use builtin::{builtin_model, Benes, ModelName, ModelParams, ModelParts, OrnsteinUhlenbeck, VanDerPol};
pub use density::{
    BumpDensity, GaussianDensity, GaussianObservation, InitialDensity, Likelihood, MeasurementRecord,
    Measurements,
};
pub use dynamics::{Diffusion, Drift, FD_FALLBACK_STEP};
pub use grid::TimeGrid;
pub use path::DiscretePath;
pub use validate::{validate_model, ValidationReport, DIVERGENCE_TOL, JACOBIAN_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("measurement instant {time} lies outside [0, {horizon}]")]
    MeasurementOutsideHorizon { time: f64, horizon: f64 },
    #[error("N·mesh = {product} violates the partition bound {bound}")]
    MeshBoundViolated { product: f64, bound: f64 },
    #[error("diffusion matrix is singular or not square")]
    SingularDiffusion,
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Everything needed to evaluate a posterior merit: dynamics, initial law
/// and measurements on `[0, horizon]`.
#[derive(Clone)]
pub struct Problem {
    pub drift: Arc<dyn Drift>,
    pub diffusion: Diffusion,
    pub initial: Arc<dyn InitialDensity>,
    pub measurements: Measurements,
    pub horizon: f64,
}

impl Problem {
    pub fn new(
        drift: Arc<dyn Drift>,
        diffusion: Diffusion,
        initial: Arc<dyn InitialDensity>,
        measurements: Measurements,
        horizon: f64,
    ) -> Result<Self, ModelError> {
        let n = drift.dim();
        if diffusion.dim() != n {
            return Err(ModelError::DimensionMismatch { expected: n, found: diffusion.dim() });
        }
        if initial.dim() != n {
            return Err(ModelError::DimensionMismatch { expected: n, found: initial.dim() });
        }
        for r in measurements.records() {
            if !(r.time >= 0.0 && r.time <= horizon) {
                return Err(ModelError::MeasurementOutsideHorizon { time: r.time, horizon });
            }
        }
        Ok(Problem { drift, diffusion, initial, measurements, horizon })
    }

    pub fn from_parts(parts: &ModelParts, measurements: Measurements, horizon: f64) -> Result<Self, ModelError> {
        Self::new(
            parts.drift.clone(),
            parts.diffusion.clone(),
            parts.initial.clone(),
            measurements,
            horizon,
        )
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    /// Uniform grid with `segments` segments containing every measurement
    /// instant.
    pub fn grid(&self, segments: usize) -> Result<Arc<TimeGrid>, ModelError> {
        TimeGrid::uniform(self.horizon, segments, &self.measurements.times()).map(Arc::new)
    }
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("dim", &self.dim())
            .field("diffusion", &self.diffusion)
            .field("initial", &self.initial)
            .field("measurements", &self.measurements.len())
            .field("horizon", &self.horizon)
            .finish()
    }
}
