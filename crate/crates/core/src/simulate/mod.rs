//! Ground-truth simulation of additive-noise SDEs and generation of
//! outlier-contaminated measurements.

mod measure;
mod order;

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub use measure::{
    sample_measurements, student_t_grad_loglik, student_t_loglik, write_measurements_csv, write_path_csv,
    MeasurementSet, OutlierModel, StudentTLikelihood,
};
pub use order::{loglog_slope, strong_error_study, ReferenceScheme, StrongErrorPoint, StrongStudy};

use crate::model::{DiscretePath, Diffusion, Drift, TimeGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulateError {
    #[error("state became non-finite at step {step}")]
    NonFinite { step: usize },
    #[error("invalid simulation setting: {0}")]
    Invalid(String),
}

/// Reproducible random stream identified by a master seed and a stream
/// index. Distinct pairs give independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub index: u64,
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        RngStream { seed, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }
}

/// Supplier of Brownian increments over a step of length `h`.
pub trait IncrementSource {
    /// `ΔW ~ N(0, h I)`.
    fn wiener(&mut self, h: f64, dw: &mut [f64]);

    /// `ΔW` together with `ΔZ = ∫ (W_s - W_{t₀}) ds` over the step:
    /// `Var ΔZ = h³/3`, `Cov(ΔW, ΔZ) = h²/2` per component.
    fn wiener_pair(&mut self, h: f64, dw: &mut [f64], dz: &mut [f64]);
}

/// Increments drawn from a random number generator.
#[derive(Debug, Clone)]
pub struct WienerSource<R> {
    rng: R,
}

impl<R: Rng> WienerSource<R> {
    pub fn new(rng: R) -> Self {
        WienerSource { rng }
    }

    pub fn into_inner(self) -> R {
        self.rng
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}

impl<R: Rng> IncrementSource for WienerSource<R> {
    fn wiener(&mut self, h: f64, dw: &mut [f64]) {
        let s = h.sqrt();
        for v in dw.iter_mut() {
            let u: f64 = self.rng.sample(StandardNormal);
            *v = s * u;
        }
    }

    fn wiener_pair(&mut self, h: f64, dw: &mut [f64], dz: &mut [f64]) {
        let s = h.sqrt();
        let c = 0.5 * h * s;
        let inv_sqrt3 = 1.0 / 3f64.sqrt();
        for (w, z) in dw.iter_mut().zip(dz.iter_mut()) {
            let u1: f64 = self.rng.sample(StandardNormal);
            let u2: f64 = self.rng.sample(StandardNormal);
            *w = s * u1;
            *z = c * (u1 + u2 * inv_sqrt3);
        }
    }
}

/// All increments zero: the integrators reduce to their deterministic parts.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl IncrementSource for ZeroNoise {
    fn wiener(&mut self, _h: f64, dw: &mut [f64]) {
        dw.fill(0.0);
    }

    fn wiener_pair(&mut self, _h: f64, dw: &mut [f64], dz: &mut [f64]) {
        dw.fill(0.0);
        dz.fill(0.0);
    }
}

/// Replays pre-computed increments, one `(ΔW, ΔZ)` pair per call. Used to
/// drive several integrators with the same Brownian path.
#[derive(Debug, Clone)]
pub struct ReplaySource {
    dw: Vec<f64>,
    dz: Vec<f64>,
    dim: usize,
    cursor: usize,
}

impl ReplaySource {
    /// `dw` and `dz` hold consecutive increments, `dim` values per step.
    pub fn new(dim: usize, dw: Vec<f64>, dz: Vec<f64>) -> Self {
        assert_eq!(dw.len(), dz.len());
        ReplaySource { dw, dz, dim, cursor: 0 }
    }

    fn next(&mut self) -> (&[f64], &[f64]) {
        let a = self.cursor * self.dim;
        assert!(a + self.dim <= self.dw.len(), "replay source exhausted");
        self.cursor += 1;
        (&self.dw[a..a + self.dim], &self.dz[a..a + self.dim])
    }
}

impl IncrementSource for ReplaySource {
    fn wiener(&mut self, _h: f64, dw: &mut [f64]) {
        let (w, _) = self.next();
        dw.copy_from_slice(w);
    }

    fn wiener_pair(&mut self, _h: f64, dw: &mut [f64], dz: &mut [f64]) {
        let (w, z) = self.next();
        dw.copy_from_slice(w);
        dz.copy_from_slice(z);
    }
}

/// Draws `N(mean, diag(variances))`.
pub fn sample_gaussian(rng: &mut impl Rng, mean: &[f64], variances: &[f64]) -> Vec<f64> {
    mean.iter()
        .zip(variances)
        .map(|(m, v)| {
            let u: f64 = rng.sample(StandardNormal);
            m + v.sqrt() * u
        })
        .collect()
}

fn step_grid(h: f64, horizon: f64) -> Result<Arc<TimeGrid>, SimulateError> {
    if !(h > 0.0 && horizon > 0.0 && h.is_finite() && horizon.is_finite()) {
        return Err(SimulateError::Invalid(format!("need h > 0 and T > 0, got h = {h}, T = {horizon}")));
    }
    let steps = ((horizon / h).round() as usize).max(1);
    TimeGrid::uniform(horizon, steps, &[])
        .map(Arc::new)
        .map_err(|e| SimulateError::Invalid(e.to_string()))
}

fn check_dims(drift: &dyn Drift, diffusion: &Diffusion, x0: &[f64]) -> Result<usize, SimulateError> {
    let n = drift.dim();
    if diffusion.dim() != n || x0.len() != n {
        return Err(SimulateError::Invalid(format!(
            "dimension mismatch: drift {n}, diffusion {}, x0 {}",
            diffusion.dim(),
            x0.len()
        )));
    }
    Ok(n)
}

/// Euler–Maruyama: `x_{k+1} = x_k + f(t_k, x_k) h + G ΔW_k`.
///
/// The step is adjusted to `T / round(T / h)` so that the path ends at `T`.
pub fn euler_maruyama(
    drift: &dyn Drift,
    diffusion: &Diffusion,
    x0: &[f64],
    h: f64,
    horizon: f64,
    source: &mut dyn IncrementSource,
) -> Result<DiscretePath, SimulateError> {
    let n = check_dims(drift, diffusion, x0)?;
    let grid = step_grid(h, horizon)?;
    let g = diffusion.g();
    let mut states = Vec::with_capacity(grid.len() * n);
    states.extend_from_slice(x0);
    let mut x = DVector::from_column_slice(x0);
    let mut dw = DVector::zeros(n);
    for k in 0..grid.segments() {
        let t = grid.times()[k];
        let dt = grid.step(k);
        source.wiener(dt, dw.as_mut_slice());
        x += drift.eval(t, x.as_slice()) * dt + g * &dw;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(SimulateError::NonFinite { step: k });
        }
        states.extend_from_slice(x.as_slice());
    }
    Ok(DiscretePath::new(grid, n, states).expect("state count matches grid"))
}

/// Order-1.5 strong Itô–Taylor scheme for additive noise:
///
/// `x_{k+1} = x_k + f h + G ΔW + ½ L⁰f h² + (∇f G) ΔZ`, with
/// `L⁰f = ∂f/∂t + (∇f) f + ½ Σ_{l,m} (G Gᵀ)_{lm} ∂²f/∂x_l ∂x_m`.
pub fn strong_order_15(
    drift: &dyn Drift,
    diffusion: &Diffusion,
    x0: &[f64],
    h: f64,
    horizon: f64,
    source: &mut dyn IncrementSource,
) -> Result<DiscretePath, SimulateError> {
    let n = check_dims(drift, diffusion, x0)?;
    let grid = step_grid(h, horizon)?;
    let g = diffusion.g();
    let s = g * g.transpose();
    let mut states = Vec::with_capacity(grid.len() * n);
    states.extend_from_slice(x0);
    let mut x = DVector::from_column_slice(x0);
    let mut dw = DVector::zeros(n);
    let mut dz = DVector::zeros(n);
    for k in 0..grid.segments() {
        let t = grid.times()[k];
        let dt = grid.step(k);
        source.wiener_pair(dt, dw.as_mut_slice(), dz.as_mut_slice());
        let xs = x.as_slice();
        let f = drift.eval(t, xs);
        let jac = drift.jacobian(t, xs);
        let mut l0 = drift.time_derivative(t, xs) + &jac * &f;
        for m in 0..n {
            let d = drift.jacobian_derivative(t, xs, m);
            for l in 0..n {
                if s[(l, m)] != 0.0 {
                    for i in 0..n {
                        l0[i] += 0.5 * s[(l, m)] * d[(i, l)];
                    }
                }
            }
        }
        let increment = &f * dt + g * &dw + l0 * (0.5 * dt * dt) + (&jac * g) * &dz;
        x += increment;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(SimulateError::NonFinite { step: k });
        }
        states.extend_from_slice(x.as_slice());
    }
    Ok(DiscretePath::new(grid, n, states).expect("state count matches grid"))
}
