//! Merit functions over state paths: the discretized merits (Euler and
//! trapezoidal, with analytic gradients) and their continuous-time limits
//! (Onsager–Machlup and energy functionals).

mod continuous;
mod discrete;

#[cfg(test)]
mod tests;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

pub use continuous::{
    continuous_energy, continuous_om, curve_divergence_integral, curve_energy, curve_om, curve_posterior_terms,
    energy_merit, map_merit, Curve, FnCurve, QuadratureRule,
};
pub use discrete::{
    euler_energy, euler_merit, exact_merit, trapezoidal_energy, trapezoidal_energy_merit, trapezoidal_merit,
    trapezoidal_om,
};

use crate::model::{Problem, TimeGrid};
use crate::oracle::ExactTransition;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeritError {
    #[error(
        "det(I - ½∇f·δ) = {determinant} on segment {segment}: the implicit trapezoidal step is not \
         a contraction there; refine the grid"
    )]
    NonPositiveDeterminant { segment: usize, determinant: f64 },
    #[error("measurement instant {time} is not a grid point")]
    MeasurementOffGrid { time: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Extended real in `ℝ ∪ {-∞}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    NegInfinity,
    Finite(f64),
}

impl ExtReal {
    /// Non-finite inputs (including NaN) map to `-∞`.
    pub fn from_f64(v: f64) -> Self {
        if v.is_finite() {
            ExtReal::Finite(v)
        } else {
            ExtReal::NegInfinity
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::NegInfinity => None,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::NEG_INFINITY)
    }
}

/// Value of a discrete merit with its gradient over all path states
/// (length `(N + 1) n`); the gradient is absent at `-∞`.
#[derive(Debug, Clone, PartialEq)]
pub enum MeritValue {
    NegInfinity,
    Finite { value: f64, gradient: Vec<f64> },
}

impl MeritValue {
    pub fn value(&self) -> ExtReal {
        match self {
            MeritValue::NegInfinity => ExtReal::NegInfinity,
            MeritValue::Finite { value, .. } => ExtReal::Finite(*value),
        }
    }

    pub fn finite_value(&self) -> Option<f64> {
        self.value().finite()
    }

    pub fn gradient(&self) -> Option<&[f64]> {
        match self {
            MeritValue::NegInfinity => None,
            MeritValue::Finite { gradient, .. } => Some(gradient),
        }
    }
}

/// Named discretized merit, as selected in configs and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MeritKind {
    Euler,
    Trapezoidal,
    /// Trapezoidal scheme without the volume terms; discretizes `H_e`.
    TrapezoidalEnergy,
    Exact,
}

impl MeritKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MeritKind::Euler => "euler",
            MeritKind::Trapezoidal => "trapezoidal",
            MeritKind::TrapezoidalEnergy => "trapezoidal_energy",
            MeritKind::Exact => "exact",
        }
    }
}

impl fmt::Display for MeritKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeritKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euler" => Ok(MeritKind::Euler),
            "trapezoidal" => Ok(MeritKind::Trapezoidal),
            "trapezoidal_energy" => Ok(MeritKind::TrapezoidalEnergy),
            "exact" => Ok(MeritKind::Exact),
            other => Err(format!("unknown merit kind '{other}'")),
        }
    }
}

/// A discretized merit bound to a problem, ready to be evaluated on raw
/// state vectors over a fixed grid.
#[derive(Clone)]
pub enum DiscreteMerit {
    Euler,
    Trapezoidal,
    TrapezoidalEnergy,
    Exact(Arc<dyn ExactTransition>),
}

impl DiscreteMerit {
    pub fn kind(&self) -> MeritKind {
        match self {
            DiscreteMerit::Euler => MeritKind::Euler,
            DiscreteMerit::Trapezoidal => MeritKind::Trapezoidal,
            DiscreteMerit::TrapezoidalEnergy => MeritKind::TrapezoidalEnergy,
            DiscreteMerit::Exact(_) => MeritKind::Exact,
        }
    }

    pub fn evaluate(&self, grid: &TimeGrid, problem: &Problem, states: &[f64]) -> Result<MeritValue, MeritError> {
        let n = problem.dim();
        match self {
            DiscreteMerit::Euler => discrete::euler_states(grid, n, states, problem),
            DiscreteMerit::Trapezoidal => discrete::trapezoidal_states(grid, n, states, problem),
            DiscreteMerit::TrapezoidalEnergy => discrete::trapezoidal_energy_states(grid, n, states, problem),
            DiscreteMerit::Exact(tr) => discrete::exact_states(grid, n, states, tr.as_ref(), problem),
        }
    }
}

impl fmt::Debug for DiscreteMerit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind().as_str())
    }
}
