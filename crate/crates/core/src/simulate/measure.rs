use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

use super::SimulateError;
use crate::model::{DiscretePath, Likelihood, Measurements};

/// Two-component Gaussian mixture of regular measurements and outliers
/// around the observed state component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierModel {
    pub sigma_y: f64,
    pub sigma_o: f64,
    pub p_o: f64,
}

impl OutlierModel {
    pub fn validate(&self) -> Result<(), SimulateError> {
        if !(self.sigma_y > 0.0 && self.sigma_o > 0.0) {
            return Err(SimulateError::Invalid("measurement deviations must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.p_o) {
            return Err(SimulateError::Invalid(format!("outlier probability {} outside [0, 1]", self.p_o)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub outlier: Vec<bool>,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn outlier_count(&self) -> usize {
        self.outlier.iter().filter(|&&o| o).count()
    }

    pub fn to_measurements(&self, likelihood: Arc<dyn Likelihood>) -> Measurements {
        let values: Vec<Vec<f64>> = self.values.iter().map(|&v| vec![v]).collect();
        Measurements::with_shared(&self.times, &values, likelihood)
    }
}

/// Measurements of `component` at `0, step, 2·step, …` up to the end of
/// `path`. At each instant an outlier is drawn with probability `p_o`.
pub fn sample_measurements(
    path: &DiscretePath,
    step: f64,
    model: &OutlierModel,
    component: usize,
    rng: &mut impl Rng,
) -> Result<MeasurementSet, SimulateError> {
    model.validate()?;
    if !(step > 0.0) {
        return Err(SimulateError::Invalid(format!("measurement step must be positive, got {step}")));
    }
    if component >= path.dim() {
        return Err(SimulateError::Invalid(format!("component {component} out of range")));
    }
    let horizon = path.grid().horizon();
    let count = (horizon / step + 1e-9).floor() as usize;
    let mut set = MeasurementSet { times: Vec::new(), values: Vec::new(), outlier: Vec::new() };
    for k in 0..=count {
        let t = (k as f64 * step).min(horizon);
        let u = path.at(t)[component];
        let is_outlier = rng.random::<f64>() < model.p_o;
        let sigma = if is_outlier { model.sigma_o } else { model.sigma_y };
        let e: f64 = rng.sample(StandardNormal);
        set.times.push(t);
        set.values.push(u + sigma * e);
        set.outlier.push(is_outlier);
    }
    Ok(set)
}

/// Student-t (4 degrees of freedom, scale `σ_y`) log-likelihood without its
/// normalizing constant: `-(5/2) ln(1 + (u - y)² / (4σ_y²))`.
pub fn student_t_loglik(y: f64, u: f64, sigma_y: f64) -> f64 {
    let r = u - y;
    -2.5 * (r * r / (4.0 * sigma_y * sigma_y)).ln_1p()
}

/// Derivative of [`student_t_loglik`] with respect to `u`.
pub fn student_t_grad_loglik(y: f64, u: f64, sigma_y: f64) -> f64 {
    let r = u - y;
    -5.0 * r / (4.0 * sigma_y * sigma_y + r * r)
}

/// [`student_t_loglik`] on one component of the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentTLikelihood {
    pub sigma_y: f64,
    pub component: usize,
    pub dim: usize,
}

impl Likelihood for StudentTLikelihood {
    fn log_likelihood(&self, y: &[f64], x: &[f64]) -> f64 {
        student_t_loglik(y[0], x[self.component], self.sigma_y)
    }

    fn grad_log_likelihood(&self, y: &[f64], x: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        g[self.component] = student_t_grad_loglik(y[0], x[self.component], self.sigma_y);
        g
    }

    fn observed_components(&self) -> Vec<usize> {
        vec![self.component]
    }

    /// Weight `5 / (4σ_y² + r²)` of the quadratic majorizer at residual `r`;
    /// exact at `r = 0` and positive everywhere.
    fn curvature(&self, y: &[f64], x: &[f64]) -> DMatrix<f64> {
        let r = x[self.component] - y[0];
        let mut h = DMatrix::zeros(self.dim, self.dim);
        h[(self.component, self.component)] = 5.0 / (4.0 * self.sigma_y * self.sigma_y + r * r);
        h
    }
}

/// CSV with header `t,x1,...,xn`, values in `{:.16e}` (17 significant digits).
pub fn write_path_csv(w: &mut impl Write, path: &DiscretePath) -> io::Result<()> {
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=path.dim()).map(|i| format!("x{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (k, t) in path.grid().times().iter().enumerate() {
        write!(w, "{t:.16e}")?;
        for v in path.state(k) {
            write!(w, ",{v:.16e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// CSV with header `t,y,outlier_flag`; the flag is `0` or `1`.
pub fn write_measurements_csv(w: &mut impl Write, set: &MeasurementSet) -> io::Result<()> {
    writeln!(w, "t,y,outlier_flag")?;
    for ((t, y), o) in set.times.iter().zip(&set.values).zip(&set.outlier) {
        writeln!(w, "{t:.16e},{y:.16e},{}", u8::from(*o))?;
    }
    Ok(())
}
