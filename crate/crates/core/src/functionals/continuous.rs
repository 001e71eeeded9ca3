//! Continuous-time functionals evaluated by composite Gauss–Legendre
//! quadrature on the breaks of a grid.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::DVector;

use super::discrete::posterior_terms;
use super::{ExtReal, MeritError};
use crate::model::{DiscretePath, Diffusion, Drift, Problem, TimeGrid};

/// Gauss–Legendre rule on `[-1, 1]`, applied per grid segment.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn gauss_legendre(points: usize) -> Self {
        let degree = NonZeroUsize::new(points).expect("quadrature needs at least one point");
        let rule = GaussLegendre::new(degree);
        let (nodes, weights) = rule.as_node_weight_pairs().iter().copied().unzip();
        QuadratureRule { nodes, weights }
    }

    /// Default rule for the path functionals.
    pub fn three_point() -> Self {
        Self::gauss_legendre(3)
    }

    /// Higher-order rule used for cross-checks.
    pub fn seven_point() -> Self {
        Self::gauss_legendre(7)
    }

    pub fn points(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped onto `[a, b]`; weights sum to `b - a`.
    pub fn on_segment(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, grid: &TimeGrid, mut f: impl FnMut(f64) -> f64) -> f64 {
        grid.times()
            .windows(2)
            .map(|s| self.on_segment(s[0], s[1]).map(|(t, w)| w * f(t)).sum::<f64>())
            .sum()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::three_point()
    }
}

/// A path `φ` with derivative, evaluated between the breaks of a grid.
pub trait Curve {
    fn dim(&self) -> usize;
    fn value(&self, t: f64) -> Vec<f64>;
    fn derivative(&self, t: f64) -> Vec<f64>;
}

impl Curve for DiscretePath {
    fn dim(&self) -> usize {
        DiscretePath::dim(self)
    }

    fn value(&self, t: f64) -> Vec<f64> {
        self.at(t)
    }

    fn derivative(&self, t: f64) -> Vec<f64> {
        let k = self.grid().segment_of(t);
        let delta = self.grid().step(k);
        self.state(k + 1)
            .iter()
            .zip(self.state(k))
            .map(|(b, a)| (b - a) / delta)
            .collect()
    }
}

/// Smooth curve given by closures for its value and derivative.
pub struct FnCurve<V, D> {
    pub dim: usize,
    pub value: V,
    pub derivative: D,
}

impl<V, D> Curve for FnCurve<V, D>
where
    V: Fn(f64) -> Vec<f64>,
    D: Fn(f64) -> Vec<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, t: f64) -> Vec<f64> {
        (self.value)(t)
    }

    fn derivative(&self, t: f64) -> Vec<f64> {
        (self.derivative)(t)
    }
}

/// `J_e(φ) = -½ ∫ ‖φ̇ - f(t, φ)‖²_Q dt` over the span of `breaks`.
pub fn curve_energy(curve: &dyn Curve, breaks: &TimeGrid, drift: &dyn Drift, diffusion: &Diffusion, rule: &QuadratureRule) -> f64 {
    let n = curve.dim();
    -0.5 * rule.integrate(breaks, |t| {
        let x = curve.value(t);
        let dx = curve.derivative(t);
        let f = drift.eval(t, &x);
        let r = DVector::from_iterator(n, dx.iter().zip(f.iter()).map(|(a, b)| a - b));
        diffusion.sq_norm(&r)
    })
}

/// `∫ div f(t, φ(t)) dt` over the span of `breaks`.
pub fn curve_divergence_integral(curve: &dyn Curve, breaks: &TimeGrid, drift: &dyn Drift, rule: &QuadratureRule) -> f64 {
    rule.integrate(breaks, |t| drift.divergence(t, &curve.value(t)))
}

/// Onsager–Machlup functional `J(φ) = J_e(φ) - ½ ∫ div f(t, φ) dt`.
pub fn curve_om(curve: &dyn Curve, breaks: &TimeGrid, drift: &dyn Drift, diffusion: &Diffusion, rule: &QuadratureRule) -> f64 {
    curve_energy(curve, breaks, drift, diffusion, rule) - 0.5 * curve_divergence_integral(curve, breaks, drift, rule)
}

/// `ln ν(φ(0)) + Σ ln ψ_t(y_t | φ(t))` for an arbitrary curve.
pub fn curve_posterior_terms(curve: &dyn Curve, problem: &Problem) -> ExtReal {
    let mut value = problem.initial.log_density(&curve.value(0.0));
    for rec in problem.measurements.records() {
        value += rec.likelihood.log_likelihood(&rec.value, &curve.value(rec.time));
    }
    ExtReal::from_f64(value)
}

/// Energy functional of a piecewise-linear path (`φ̇` constant per segment).
pub fn continuous_energy(path: &DiscretePath, drift: &dyn Drift, diffusion: &Diffusion, rule: &QuadratureRule) -> f64 {
    curve_energy(path, path.grid(), drift, diffusion, rule)
}

/// Onsager–Machlup functional of a piecewise-linear path.
pub fn continuous_om(path: &DiscretePath, drift: &dyn Drift, diffusion: &Diffusion, rule: &QuadratureRule) -> f64 {
    curve_om(path, path.grid(), drift, diffusion, rule)
}

/// MAP merit `H = J + ln ν(φ(0)) + Σ ln ψ_t(y_t | φ(t))`.
pub fn map_merit(path: &DiscretePath, problem: &Problem, rule: &QuadratureRule) -> Result<ExtReal, MeritError> {
    let Some(post) = posterior_terms(path.grid(), path.dim(), path.states(), problem, None)? else {
        return Ok(ExtReal::NegInfinity);
    };
    Ok(ExtReal::from_f64(
        continuous_om(path, problem.drift.as_ref(), &problem.diffusion, rule) + post,
    ))
}

/// Energy merit `H_e = J_e + ln ν(φ(0)) + Σ ln ψ_t(y_t | φ(t))`.
pub fn energy_merit(path: &DiscretePath, problem: &Problem, rule: &QuadratureRule) -> Result<ExtReal, MeritError> {
    let Some(post) = posterior_terms(path.grid(), path.dim(), path.states(), problem, None)? else {
        return Ok(ExtReal::NegInfinity);
    };
    Ok(ExtReal::from_f64(
        continuous_energy(path, problem.drift.as_ref(), &problem.diffusion, rule) + post,
    ))
}
