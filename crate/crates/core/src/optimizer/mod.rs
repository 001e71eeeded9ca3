//! Maximization of discrete merits over paths and nested-grid convergence
//! studies.

mod init;
mod lbfgs;
mod precond;
mod study;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use init::{initial_path, InitStrategy};
pub use lbfgs::{maximize_vec, rounding_floor, Objective, VecOutcome};
pub use precond::{GaussNewtonPreconditioner, PathPreconditioner, Preconditioner};
pub use study::{convergence_study, ColdStart, ConvergenceStudy, LevelRecord, StudyError, StudyOptions};

use crate::functionals::{DiscreteMerit, MeritError};
use crate::model::{DiscretePath, Problem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("merit is -∞ at the starting path")]
    NonFiniteStart,
    #[error("invalid optimizer options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Merit(#[from] MeritError),
    #[error("initial path: {0}")]
    Init(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    /// Stop when the largest gradient component is at most this.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Number of stored curvature pairs.
    pub memory: usize,
    /// Armijo constant.
    pub sufficient_decrease: f64,
    /// Step shrink factor per backtrack.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Iterations between preconditioner refreshes; 0 never refreshes.
    pub precond_refresh: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            grad_tol: 1e-8,
            max_iter: 500,
            memory: 10,
            sufficient_decrease: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            precond_refresh: 25,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |msg: &str| Err(OptimizeError::InvalidOptions(msg.to_string()));
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if self.max_iter == 0 || self.memory == 0 || self.max_backtracks == 0 {
            return bad("max_iter, memory and max_backtracks must be positive");
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return bad("sufficient_decrease must lie in (0, 1)");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Converged,
    MaxIter,
    LineSearchFailure,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::LineSearchFailure => "line_search_failure",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "converged" => Ok(Status::Converged),
            "max_iter" => Ok(Status::MaxIter),
            "line_search_failure" => Ok(Status::LineSearchFailure),
            other => Err(format!("unknown status '{other}'")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub path: DiscretePath,
    pub merit: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: Status,
    pub trace: Vec<f64>,
}

/// Maximizes an arbitrary objective over the states of `x0`.
pub fn maximize(
    objective: &dyn Objective,
    x0: &DiscretePath,
    opts: &OptimizerOptions,
    precond: Option<&mut dyn Preconditioner>,
) -> Result<OptimizationResult, OptimizeError> {
    let out = maximize_vec(objective, x0.states().to_vec(), opts, precond)?;
    Ok(OptimizationResult {
        path: x0.with_states(out.x).expect("optimizer preserves the state count"),
        merit: out.merit,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        status: out.status,
        trace: out.trace,
    })
}

/// Maximizes a discrete merit of `problem` on the grid of `x0`, with the
/// Gauss–Newton preconditioner linearized at the current iterate. Falls
/// back to the Brownian-energy preconditioner when the Gauss–Newton matrix
/// at `x0` is not positive definite.
pub fn maximize_merit(
    problem: &Problem,
    merit: &DiscreteMerit,
    x0: &DiscretePath,
    opts: &OptimizerOptions,
) -> Result<OptimizationResult, OptimizeError> {
    let grid = x0.grid().clone();
    let objective = |x: &[f64]| merit.evaluate(&grid, problem, x);
    match GaussNewtonPreconditioner::new(problem, merit.kind(), &grid, x0.states()) {
        Some(mut gn) => maximize(&objective, x0, opts, Some(&mut gn)),
        None => {
            let mut brownian = PathPreconditioner::new(&grid, &problem.diffusion);
            maximize(&objective, x0, opts, Some(&mut brownian))
        }
    }
}
