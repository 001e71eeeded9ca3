use nalgebra::{DMatrix, DVector};

use super::{LinearGaussianSpec, OracleError};
use crate::model::TimeGrid;

/// Linear-Gaussian measurement `y = H x + v`, `v ~ N(0, R)`. `R` may be
/// zero (noise-free observation) as long as `H P Hᵀ` stays invertible.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMeasurement {
    pub time: f64,
    pub value: DVector<f64>,
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl LinearMeasurement {
    /// Direct noisy observation of selected components.
    pub fn observe(time: f64, value: &[f64], components: &[usize], variances: &[f64], dim: usize) -> Self {
        let m = components.len();
        let mut h = DMatrix::zeros(m, dim);
        for (row, &c) in components.iter().enumerate() {
            h[(row, c)] = 1.0;
        }
        LinearMeasurement {
            time,
            value: DVector::from_column_slice(value),
            h,
            r: DMatrix::from_diagonal(&DVector::from_column_slice(variances)),
        }
    }
}

/// Smoothed Gaussian marginals at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherOutput {
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
}

impl SmootherOutput {
    /// Means flattened row-major, matching the layout of path states.
    pub fn flat_means(&self) -> Vec<f64> {
        self.means.iter().flat_map(|m| m.iter().copied()).collect()
    }
}

/// Kalman filter plus Rauch–Tung–Striebel backward pass over the exact
/// discretization of the linear SDE on `grid`.
pub fn rts_smoother(
    spec: &LinearGaussianSpec,
    grid: &TimeGrid,
    measurements: &[LinearMeasurement],
) -> Result<SmootherOutput, OracleError> {
    let points = grid.len();
    let n = spec.dim();
    let mut by_index: Vec<Vec<&LinearMeasurement>> = vec![Vec::new(); points];
    for m in measurements {
        let k = grid.index_of(m.time);
        if (grid.times()[k] - m.time).abs() > 1e-9 * grid.horizon().max(1.0) {
            return Err(OracleError::MeasurementOffGrid { time: m.time });
        }
        by_index[k].push(m);
    }

    let mut filt_m = Vec::with_capacity(points);
    let mut filt_p = Vec::with_capacity(points);
    let mut pred_m: Vec<DVector<f64>> = Vec::with_capacity(points);
    let mut pred_p: Vec<DMatrix<f64>> = Vec::with_capacity(points);
    let mut phis = Vec::with_capacity(points);

    let mut m = spec.init_mean.clone();
    let mut p = spec.init_cov.clone();
    for k in 0..points {
        if k > 0 {
            let delta = grid.step(k - 1);
            let phi = spec.transition_matrix(delta);
            m = &phi * &m;
            p = &phi * &p * phi.transpose() + spec.transition_covariance(delta);
            phis.push(phi);
        }
        pred_m.push(m.clone());
        pred_p.push(p.clone());
        for meas in &by_index[k] {
            let s = &meas.h * &p * meas.h.transpose() + &meas.r;
            let s_inv = s
                .cholesky()
                .ok_or(OracleError::NotPositiveDefinite { index: k })?
                .inverse();
            let gain = &p * meas.h.transpose() * s_inv;
            m = &m + &gain * (&meas.value - &meas.h * &m);
            let ikh = DMatrix::identity(n, n) - &gain * &meas.h;
            p = &ikh * &p * ikh.transpose() + &gain * &meas.r * gain.transpose();
        }
        filt_m.push(m.clone());
        filt_p.push(p.clone());
    }

    let mut means = filt_m.clone();
    let mut covs = filt_p.clone();
    for k in (0..points - 1).rev() {
        let pred_inv = pred_p[k + 1]
            .clone()
            .cholesky()
            .ok_or(OracleError::NotPositiveDefinite { index: k + 1 })?
            .inverse();
        let gain = &filt_p[k] * phis[k].transpose() * pred_inv;
        means[k] = &filt_m[k] + &gain * (&means[k + 1] - &pred_m[k + 1]);
        covs[k] = &filt_p[k] + &gain * (&covs[k + 1] - &pred_p[k + 1]) * gain.transpose();
    }
    Ok(SmootherOutput { means, covariances: covs })
}
