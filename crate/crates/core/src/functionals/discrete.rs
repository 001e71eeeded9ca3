//! Discretized state-path merits and their analytic gradients.

use nalgebra::{DMatrix, DVector};

use super::{MeritError, MeritValue};
use crate::model::{DiscretePath, Diffusion, Drift, Problem, TimeGrid};
use crate::oracle::ExactTransition;

#[derive(Debug, Clone, Copy)]
struct Scheme {
    /// Average the drift over both segment endpoints instead of using the left one.
    trapezoidal: bool,
    /// Add the `ln det(I - ½ ∇x f(t_{k+1}, x_{k+1}) δ_k)` volume terms.
    log_det: bool,
}

const EULER: Scheme = Scheme { trapezoidal: false, log_det: false };
const TRAPEZOIDAL: Scheme = Scheme { trapezoidal: true, log_det: true };
const TRAPEZOIDAL_ENERGY: Scheme = Scheme { trapezoidal: true, log_det: false };

/// Dynamics part of a discrete merit. Returns the value and adds its
/// gradient into `grad`.
fn dynamics_term(
    grid: &TimeGrid,
    dim: usize,
    states: &[f64],
    drift: &dyn Drift,
    diffusion: &Diffusion,
    scheme: Scheme,
    grad: &mut [f64],
) -> Result<f64, MeritError> {
    let n = dim;
    let times = grid.times();
    let points = grid.len();
    if states.len() != points * n || drift.dim() != n || diffusion.dim() != n {
        return Err(MeritError::DimensionMismatch { expected: points * n, found: states.len() });
    }
    let x = |k: usize| &states[k * n..(k + 1) * n];
    let drift_at: Vec<DVector<f64>> = (0..points).map(|k| drift.eval(times[k], x(k))).collect();
    let jac_at: Vec<DMatrix<f64>> = (0..points).map(|k| drift.jacobian(times[k], x(k))).collect();

    let mut value = 0.0;
    let mut r = DVector::zeros(n);
    for k in 0..grid.segments() {
        let delta = grid.step(k);
        let (xk, xk1) = (x(k), x(k + 1));
        for i in 0..n {
            let f_term = if scheme.trapezoidal {
                0.5 * (drift_at[k][i] + drift_at[k + 1][i])
            } else {
                drift_at[k][i]
            };
            r[i] = (xk1[i] - xk[i]) / delta - f_term;
        }
        let w = diffusion.weight(&r);
        value -= 0.5 * delta * r.dot(&w);

        let (left_scale, right_scale) = if scheme.trapezoidal { (0.5 * delta, 0.5 * delta) } else { (delta, 0.0) };
        let jw_left = jac_at[k].tr_mul(&w);
        for i in 0..n {
            grad[k * n + i] += w[i] + left_scale * jw_left[i];
            grad[(k + 1) * n + i] -= w[i];
        }
        if right_scale != 0.0 {
            let jw_right = jac_at[k + 1].tr_mul(&w);
            for i in 0..n {
                grad[(k + 1) * n + i] += right_scale * jw_right[i];
            }
        }

        if scheme.log_det {
            let m = DMatrix::identity(n, n) - &jac_at[k + 1] * (0.5 * delta);
            let lu = m.lu();
            let det = lu.determinant();
            if !(det > 0.0) {
                return Err(MeritError::NonPositiveDeterminant { segment: k, determinant: det });
            }
            value += det.ln();
            let m_inv = lu.try_inverse().ok_or(MeritError::NonPositiveDeterminant {
                segment: k,
                determinant: det,
            })?;
            for j in 0..n {
                let dj = drift.jacobian_derivative(times[k + 1], xk1, j);
                // d/dx_j ln det M = tr(M⁻¹ ∂M/∂x_j) = -½δ tr(M⁻¹ ∂J/∂x_j)
                let tr: f64 = (0..n)
                    .map(|a| (0..n).map(|b| m_inv[(a, b)] * dj[(b, a)]).sum::<f64>())
                    .sum();
                grad[(k + 1) * n + j] -= 0.5 * delta * tr;
            }
        }
    }
    Ok(value)
}

/// Adds `ln ν(x_0) + Σ ln ψ_t(y_t | x_t)` and its gradient. Returns `None`
/// when any density vanishes (or is not a number) at the path.
pub(crate) fn posterior_terms(
    grid: &TimeGrid,
    dim: usize,
    states: &[f64],
    problem: &Problem,
    grad: Option<&mut [f64]>,
) -> Result<Option<f64>, MeritError> {
    let n = dim;
    let x0 = &states[..n];
    let mut value = problem.initial.log_density(x0);
    if !value.is_finite() {
        return Ok(None);
    }
    let mut indices = Vec::with_capacity(problem.measurements.len());
    for rec in problem.measurements.records() {
        let k = measurement_index(grid, rec.time)?;
        let ll = rec.likelihood.log_likelihood(&rec.value, &states[k * n..(k + 1) * n]);
        if !ll.is_finite() {
            return Ok(None);
        }
        value += ll;
        indices.push(k);
    }
    if let Some(grad) = grad {
        let g0 = problem.initial.grad_log_density(x0);
        for i in 0..n {
            grad[i] += g0[i];
        }
        for (rec, &k) in problem.measurements.records().iter().zip(&indices) {
            let g = rec.likelihood.grad_log_likelihood(&rec.value, &states[k * n..(k + 1) * n]);
            for i in 0..n {
                grad[k * n + i] += g[i];
            }
        }
    }
    Ok(Some(value))
}

pub(crate) fn measurement_index(grid: &TimeGrid, time: f64) -> Result<usize, MeritError> {
    let k = grid.index_of(time);
    if (grid.times()[k] - time).abs() > 1e-9 * grid.horizon().max(1.0) {
        return Err(MeritError::MeasurementOffGrid { time });
    }
    Ok(k)
}

fn finish(value: f64, grad: Vec<f64>) -> MeritValue {
    if value.is_finite() && grad.iter().all(|g| g.is_finite()) {
        MeritValue::Finite { value, gradient: grad }
    } else {
        MeritValue::NegInfinity
    }
}

fn prior_only(
    grid: &TimeGrid,
    dim: usize,
    states: &[f64],
    drift: &dyn Drift,
    diffusion: &Diffusion,
    scheme: Scheme,
) -> Result<MeritValue, MeritError> {
    let mut grad = vec![0.0; states.len()];
    let value = dynamics_term(grid, dim, states, drift, diffusion, scheme, &mut grad)?;
    Ok(finish(value, grad))
}

fn posterior(
    grid: &TimeGrid,
    dim: usize,
    states: &[f64],
    problem: &Problem,
    scheme: Scheme,
) -> Result<MeritValue, MeritError> {
    let mut grad = vec![0.0; states.len()];
    let Some(post) = posterior_terms(grid, dim, states, problem, Some(&mut grad))? else {
        return Ok(MeritValue::NegInfinity);
    };
    let dynamics = dynamics_term(grid, dim, states, problem.drift.as_ref(), &problem.diffusion, scheme, &mut grad)?;
    Ok(finish(dynamics + post, grad))
}

/// Euler energy functional
/// `R = -½ Σ_k δ_k ‖Δx_k/δ_k - f(t_k, x_k)‖²_Q`.
pub fn euler_energy(path: &DiscretePath, drift: &dyn Drift, diffusion: &Diffusion) -> Result<MeritValue, MeritError> {
    prior_only(path.grid(), path.dim(), path.states(), drift, diffusion, EULER)
}

/// Euler merit `S = R + ln ν(x_0) + Σ ln ψ_t(y_t | x_t)`.
pub fn euler_merit(path: &DiscretePath, problem: &Problem) -> Result<MeritValue, MeritError> {
    posterior(path.grid(), path.dim(), path.states(), problem, EULER)
}

/// Trapezoidal Onsager–Machlup functional
/// `U = Σ_k ln det(I - ½∇x f(t_{k+1}, x_{k+1}) δ_k)
///      - ½ Σ_k δ_k ‖Δx_k/δ_k - ½[f(t_k, x_k) + f(t_{k+1}, x_{k+1})]‖²_Q`.
///
/// A non-positive determinant means the implicit scheme is not a
/// contraction on that segment; refine the grid.
pub fn trapezoidal_om(path: &DiscretePath, drift: &dyn Drift, diffusion: &Diffusion) -> Result<MeritValue, MeritError> {
    prior_only(path.grid(), path.dim(), path.states(), drift, diffusion, TRAPEZOIDAL)
}

/// Trapezoidal merit `V = U + ln ν(x_0) + Σ ln ψ_t(y_t | x_t)`.
pub fn trapezoidal_merit(path: &DiscretePath, problem: &Problem) -> Result<MeritValue, MeritError> {
    posterior(path.grid(), path.dim(), path.states(), problem, TRAPEZOIDAL)
}

/// `U` without the log-determinant terms: a trapezoidal-rule discretization
/// of the energy functional `J_e`.
pub fn trapezoidal_energy(path: &DiscretePath, drift: &dyn Drift, diffusion: &Diffusion) -> Result<MeritValue, MeritError> {
    prior_only(path.grid(), path.dim(), path.states(), drift, diffusion, TRAPEZOIDAL_ENERGY)
}

/// Posterior merit built on [`trapezoidal_energy`]; its maximizers approach
/// the minimum-energy path.
pub fn trapezoidal_energy_merit(path: &DiscretePath, problem: &Problem) -> Result<MeritValue, MeritError> {
    posterior(path.grid(), path.dim(), path.states(), problem, TRAPEZOIDAL_ENERGY)
}

/// Merit with exact transition densities,
/// `Σ_k ln p(x_{k+1} | x_k; δ_k) + ln ν(x_0) + Σ ln ψ_t(y_t | x_t)`.
pub fn exact_merit(
    path: &DiscretePath,
    transition: &dyn ExactTransition,
    problem: &Problem,
) -> Result<MeritValue, MeritError> {
    exact_states(path.grid(), path.dim(), path.states(), transition, problem)
}

pub(crate) fn exact_states(
    grid: &TimeGrid,
    dim: usize,
    states: &[f64],
    transition: &dyn ExactTransition,
    problem: &Problem,
) -> Result<MeritValue, MeritError> {
    let n = dim;
    if states.len() != grid.len() * n || transition.dim() != n {
        return Err(MeritError::DimensionMismatch { expected: grid.len() * n, found: states.len() });
    }
    let mut grad = vec![0.0; states.len()];
    let Some(mut value) = posterior_terms(grid, dim, states, problem, Some(&mut grad))? else {
        return Ok(MeritValue::NegInfinity);
    };
    let times = grid.times();
    for k in 0..grid.segments() {
        let from = &states[k * n..(k + 1) * n];
        let to = &states[(k + 1) * n..(k + 2) * n];
        let delta = grid.step(k);
        let lp = transition.log_transition(times[k], delta, from, to);
        if !lp.is_finite() {
            return Ok(MeritValue::NegInfinity);
        }
        value += lp;
        let (g_from, g_to) = transition.grad_log_transition(times[k], delta, from, to);
        for i in 0..n {
            grad[k * n + i] += g_from[i];
            grad[(k + 1) * n + i] += g_to[i];
        }
    }
    Ok(finish(value, grad))
}

pub(crate) fn euler_states(grid: &TimeGrid, dim: usize, states: &[f64], problem: &Problem) -> Result<MeritValue, MeritError> {
    posterior(grid, dim, states, problem, EULER)
}

pub(crate) fn trapezoidal_states(
    grid: &TimeGrid,
    dim: usize,
    states: &[f64],
    problem: &Problem,
) -> Result<MeritValue, MeritError> {
    posterior(grid, dim, states, problem, TRAPEZOIDAL)
}

pub(crate) fn trapezoidal_energy_states(
    grid: &TimeGrid,
    dim: usize,
    states: &[f64],
    problem: &Problem,
) -> Result<MeritValue, MeritError> {
    posterior(grid, dim, states, problem, TRAPEZOIDAL_ENERGY)
}
