use std::collections::VecDeque;

use super::{OptimizeError, OptimizerOptions, Preconditioner, Status};
use crate::functionals::{MeritError, MeritValue};

/// Merit callback over raw state vectors.
pub trait Objective {
    fn evaluate(&self, x: &[f64]) -> Result<MeritValue, MeritError>;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> Result<MeritValue, MeritError>,
{
    fn evaluate(&self, x: &[f64]) -> Result<MeritValue, MeritError> {
        self(x)
    }
}

/// Outcome of [`maximize_vec`].
#[derive(Debug, Clone, PartialEq)]
pub struct VecOutcome {
    pub x: Vec<f64>,
    pub merit: f64,
    pub gradient: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: Status,
    /// Merit after every accepted iteration, starting with the initial value.
    pub trace: Vec<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Changes of the merit below this are indistinguishable from evaluation
/// rounding.
pub fn rounding_floor(merit: f64) -> f64 {
    64.0 * f64::EPSILON * (1.0 + merit.abs())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Internally minimizes `F = -merit`; `None` marks an infeasible trial point
/// (merit `-∞` or a scheme error).
fn eval_min(objective: &dyn Objective, x: &[f64]) -> Option<(f64, Vec<f64>)> {
    match objective.evaluate(x) {
        Ok(MeritValue::Finite { value, gradient }) => Some((-value, gradient.into_iter().map(|g| -g).collect())),
        _ => None,
    }
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn direction(g: &[f64], memory: &VecDeque<Pair>, precond: Option<&dyn Preconditioner>) -> Vec<f64> {
    let apply_h0 = |q: &[f64]| match precond {
        Some(p) => p.apply(q),
        None => q.to_vec(),
    };
    let mut q = g.to_vec();
    let mut alpha = Vec::with_capacity(memory.len());
    for pair in memory.iter().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        for (qi, yi) in q.iter_mut().zip(&pair.y) {
            *qi -= a * yi;
        }
        alpha.push(a);
    }
    let mut r = apply_h0(&q);
    if let Some(last) = memory.back() {
        let hy = apply_h0(&last.y);
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &hy);
        for ri in r.iter_mut() {
            *ri *= gamma;
        }
    }
    for (pair, a) in memory.iter().zip(alpha.into_iter().rev()) {
        let b = pair.rho * dot(&pair.y, &r);
        for (ri, si) in r.iter_mut().zip(&pair.s) {
            *ri += (a - b) * si;
        }
    }
    r.iter_mut().for_each(|v| *v = -*v);
    r
}

/// Maximizes `objective` from `x0` by limited-memory BFGS with a
/// backtracking Armijo line search.
///
/// Trial points where the merit is `-∞` or cannot be evaluated are treated
/// as insufficient increase. Once the predicted change falls below
/// [`rounding_floor`], values can no longer rank trial points; a step is
/// then accepted if the merit stays within the floor and the largest
/// gradient component shrinks. The merit sequence is therefore
/// non-decreasing up to the rounding floor.
///
/// The preconditioner, if any, is refreshed at the current iterate every
/// `opts.precond_refresh` iterations; the curvature memory is then reset.
pub fn maximize_vec(
    objective: &dyn Objective,
    x0: Vec<f64>,
    opts: &OptimizerOptions,
    mut precond: Option<&mut dyn Preconditioner>,
) -> Result<VecOutcome, OptimizeError> {
    opts.validate()?;
    let (mut f, mut g) = match objective.evaluate(&x0)? {
        MeritValue::Finite { value, gradient } => (-value, gradient.into_iter().map(|v| -v).collect::<Vec<_>>()),
        MeritValue::NegInfinity => return Err(OptimizeError::NonFiniteStart),
    };
    let mut x = x0;
    let mut trace = vec![-f];
    let mut memory: VecDeque<Pair> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let mut status = Status::MaxIter;

    loop {
        let grad_norm = inf_norm(&g);
        if grad_norm <= opts.grad_tol {
            status = Status::Converged;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        if let Some(p) = precond.as_deref_mut() {
            if opts.precond_refresh > 0 && iterations > 0 && iterations % opts.precond_refresh == 0 && p.refresh(&x) {
                memory.clear();
            }
        }
        let precond = precond.as_deref();

        let mut accepted = None;
        for attempt in 0..2 {
            if attempt == 1 {
                if memory.is_empty() {
                    break;
                }
                memory.clear();
            }
            let d = direction(&g, &memory, precond);
            let mut slope = dot(&g, &d);
            let d = if slope < 0.0 {
                d
            } else {
                memory.clear();
                let d = direction(&g, &memory, precond);
                slope = dot(&g, &d);
                d
            };
            let mut step = if memory.is_empty() && precond.is_none() {
                1.0 / inf_norm(&g).max(1.0)
            } else {
                1.0
            };
            let floor = rounding_floor(f);
            for _ in 0..opts.max_backtracks {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
                let flat = -step * slope <= floor;
                if let Some((ft, gt)) = eval_min(objective, &trial) {
                    let armijo = ft <= f + opts.sufficient_decrease * step * slope;
                    let level = ft <= f + floor && inf_norm(&gt) < inf_norm(&g);
                    if armijo || (flat && level) {
                        accepted = Some((trial, ft, gt, step, d.clone()));
                        break;
                    }
                }
                if flat {
                    // shorter steps cannot be told apart from rounding noise
                    break;
                }
                step *= opts.backtrack;
            }
            if accepted.is_some() {
                break;
            }
        }

        let Some((x_new, f_new, g_new, step, d)) = accepted else {
            status = Status::LineSearchFailure;
            break;
        };
        assert!(f_new <= f + rounding_floor(f), "accepted step decreased the merit");
        let s: Vec<f64> = d.iter().map(|di| step * di).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if memory.len() == opts.memory {
                memory.pop_front();
            }
            memory.push_back(Pair { rho: 1.0 / sy, s, y });
        }
        x = x_new;
        f = f_new;
        g = g_new;
        iterations += 1;
        trace.push(-f);
    }

    let grad_norm = inf_norm(&g);
    Ok(VecOutcome {
        x,
        merit: -f,
        gradient: g.into_iter().map(|v| -v).collect(),
        grad_norm,
        iterations,
        status,
        trace,
    })
}
