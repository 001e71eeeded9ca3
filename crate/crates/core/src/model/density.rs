use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::ModelError;

/// Density `ν` of the initial state.
///
/// `log_density` may return `-∞` outside the support; the gradient is only
/// queried where the log-density is finite.
pub trait InitialDensity: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
    fn grad_log_density(&self, x: &[f64]) -> DVector<f64>;
    /// A maximizer of the density, used to seed optimizations.
    fn mode(&self) -> DVector<f64>;
    /// Positive semidefinite approximation of `-∇² ln ν` at `x`, used to
    /// precondition optimizations. Zero unless overridden.
    fn curvature(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(x.len(), x.len())
    }
}

/// Conditional measurement density `ψ_t(y | x)`.
pub trait Likelihood: Send + Sync + fmt::Debug {
    fn log_likelihood(&self, y: &[f64], x: &[f64]) -> f64;
    fn grad_log_likelihood(&self, y: &[f64], x: &[f64]) -> DVector<f64>;
    /// State components observed one-to-one by `y`, in order. Used to build
    /// initial guesses by interpolating measurements.
    fn observed_components(&self) -> Vec<usize>;
    /// Positive semidefinite approximation of `-∇²_x ln ψ(y | x)`, used to
    /// precondition optimizations. Zero unless overridden.
    fn curvature(&self, _y: &[f64], x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(x.len(), x.len())
    }
}

/// Multivariate normal `N(mean, cov)`.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianDensity {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, ModelError> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(ModelError::DimensionMismatch { expected: n * n, found: cov.len() });
        }
        let chol = cov.cholesky().ok_or(ModelError::NotPositiveDefinite)?;
        let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let log_norm = -0.5 * (n as f64 * (2.0 * PI).ln() + log_det);
        Ok(GaussianDensity { mean, precision: chol.inverse(), log_norm })
    }

    /// `N(0, variance · I_n)`.
    pub fn isotropic(n: usize, variance: f64) -> Result<Self, ModelError> {
        Self::new(DVector::zeros(n), DMatrix::identity(n, n) * variance)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }
}

impl InitialDensity for GaussianDensity {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let r = DVector::from_column_slice(x) - &self.mean;
        self.log_norm - 0.5 * r.dot(&(&self.precision * &r))
    }

    fn grad_log_density(&self, x: &[f64]) -> DVector<f64> {
        let r = DVector::from_column_slice(x) - &self.mean;
        -(&self.precision * r)
    }

    fn mode(&self) -> DVector<f64> {
        self.mean.clone()
    }

    fn curvature(&self, _x: &[f64]) -> DMatrix<f64> {
        self.precision.clone()
    }
}

/// Compactly supported density proportional to `(1 - ‖x - c‖² / r²)²` on
/// the ball of radius `r` and zero outside. Continuous everywhere, so it
/// satisfies the usual regularity requirement while exercising the `-∞`
/// branch of the merits.
#[derive(Debug, Clone)]
pub struct BumpDensity {
    center: DVector<f64>,
    radius: f64,
}

impl BumpDensity {
    pub fn new(center: DVector<f64>, radius: f64) -> Self {
        assert!(radius > 0.0);
        BumpDensity { center, radius }
    }

    fn slack(&self, x: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .zip(self.center.iter())
            .map(|(a, c)| (a - c) * (a - c))
            .sum();
        1.0 - r2 / (self.radius * self.radius)
    }
}

impl InitialDensity for BumpDensity {
    fn dim(&self) -> usize {
        self.center.len()
    }

    // unnormalized; constants do not move maximizers
    fn log_density(&self, x: &[f64]) -> f64 {
        let s = self.slack(x);
        if s > 0.0 {
            2.0 * s.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn grad_log_density(&self, x: &[f64]) -> DVector<f64> {
        let s = self.slack(x);
        let scale = -4.0 / (s * self.radius * self.radius);
        DVector::from_iterator(
            x.len(),
            x.iter().zip(self.center.iter()).map(|(a, c)| scale * (a - c)),
        )
    }

    fn mode(&self) -> DVector<f64> {
        self.center.clone()
    }
}

/// Independent Gaussian observations of selected state components,
/// `y_j ~ N(x[components[j]], variances[j])`, normalization included.
#[derive(Debug, Clone)]
pub struct GaussianObservation {
    components: Vec<usize>,
    variances: Vec<f64>,
}

impl GaussianObservation {
    pub fn new(components: Vec<usize>, variances: Vec<f64>) -> Result<Self, ModelError> {
        if components.len() != variances.len() || components.is_empty() {
            return Err(ModelError::DimensionMismatch { expected: components.len(), found: variances.len() });
        }
        if variances.iter().any(|&v| !(v > 0.0)) {
            return Err(ModelError::NotPositiveDefinite);
        }
        Ok(GaussianObservation { components, variances })
    }

    /// Scalar observation of component `component` with variance `variance`.
    pub fn scalar(component: usize, variance: f64) -> Result<Self, ModelError> {
        Self::new(vec![component], vec![variance])
    }

    pub fn components(&self) -> &[usize] {
        &self.components
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }
}

impl Likelihood for GaussianObservation {
    fn log_likelihood(&self, y: &[f64], x: &[f64]) -> f64 {
        self.components
            .iter()
            .zip(&self.variances)
            .zip(y)
            .map(|((&c, &v), &yj)| {
                let r = yj - x[c];
                -0.5 * (2.0 * PI * v).ln() - 0.5 * r * r / v
            })
            .sum()
    }

    fn grad_log_likelihood(&self, y: &[f64], x: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        for ((&c, &v), &yj) in self.components.iter().zip(&self.variances).zip(y) {
            g[c] += (yj - x[c]) / v;
        }
        g
    }

    fn observed_components(&self) -> Vec<usize> {
        self.components.clone()
    }

    fn curvature(&self, _y: &[f64], x: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(x.len(), x.len());
        for (&c, &v) in self.components.iter().zip(&self.variances) {
            h[(c, c)] += 1.0 / v;
        }
        h
    }
}

/// One measurement `y_t` with its likelihood.
#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    pub time: f64,
    pub value: Vec<f64>,
    pub likelihood: Arc<dyn Likelihood>,
}

/// Measurement set; each instant must be a point of the estimation grid.
#[derive(Debug, Clone, Default)]
pub struct Measurements {
    records: Vec<MeasurementRecord>,
}

impl Measurements {
    pub fn new(records: Vec<MeasurementRecord>) -> Self {
        Measurements { records }
    }

    pub fn empty() -> Self {
        Measurements::default()
    }

    /// Convenience constructor when every record shares one likelihood.
    pub fn with_shared(
        times: &[f64],
        values: &[Vec<f64>],
        likelihood: Arc<dyn Likelihood>,
    ) -> Self {
        let records = times
            .iter()
            .zip(values)
            .map(|(&time, value)| MeasurementRecord {
                time,
                value: value.clone(),
                likelihood: likelihood.clone(),
            })
            .collect();
        Measurements { records }
    }

    pub fn records(&self) -> &[MeasurementRecord] {
        &self.records
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
