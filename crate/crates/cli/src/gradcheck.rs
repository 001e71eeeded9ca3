//! Finite-difference cross-checks of the analytic merit gradients on random
//! paths and grids.

use std::sync::Arc;

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use sdemap::functionals::{euler_energy, euler_merit, trapezoidal_merit, trapezoidal_om, MeritError, MeritValue};
use sdemap::model::{
    builtin_model, DiscretePath, GaussianObservation, Likelihood, Measurements, ModelName, ModelParams, Problem,
    TimeGrid,
};
use sdemap::oracle::{fd_gradient, relative_error};
use sdemap::simulate::{RngStream, StudentTLikelihood};

pub const FD_STEP: f64 = 1e-6;

/// A function with an analytic gradient, checked on random inputs.
pub trait GradSubject: Sync {
    fn name(&self) -> &str;

    /// Draws one random case and returns the relative error between the
    /// analytic gradient and central differences.
    fn check_case(&self, rng: &mut ChaCha8Rng, max_segments: usize) -> Result<f64, String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub name: String,
    pub cases: usize,
    pub max_rel_error: f64,
    /// First case that could not be evaluated, if any.
    pub error: Option<String>,
    pub passed: bool,
}

/// Random problem on `[0, T]` with a non-uniform grid, a Gaussian prior and
/// two Gaussian measurements, plus a random path on that grid.
pub fn random_case(rng: &mut ChaCha8Rng, max_segments: usize) -> (Problem, DiscretePath) {
    let vdp = rng.random_bool(0.5);
    let name = if vdp { ModelName::VanDerPol } else { ModelName::Benes };
    let parts = builtin_model(name, &ModelParams::default()).expect("default parameters are valid");
    let n = parts.drift.dim();
    let segments = rng.random_range(2..=max_segments);
    // the trapezoidal determinant stays positive for these horizons and amplitudes
    let horizon = if vdp { 0.2 } else { rng.random_range(0.5..3.0) };
    let amplitude = if vdp { 0.5 } else { 1.0 };

    let weights: Vec<f64> = (0..segments).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = weights.iter().sum();
    let mut times = Vec::with_capacity(segments + 1);
    let mut t = 0.0;
    times.push(0.0);
    for w in &weights[..segments - 1] {
        t += horizon * w / total;
        times.push(t);
    }
    times.push(horizon);

    let meas_times = [times[rng.random_range(0..=segments)], times[rng.random_range(0..=segments)]];
    let values: Vec<Vec<f64>> = meas_times.iter().map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
    let lik: Arc<dyn Likelihood> =
        Arc::new(GaussianObservation::scalar(0, rng.random_range(0.1..1.0)).expect("positive variance"));
    let measurements = Measurements::with_shared(&meas_times, &values, lik);
    let grid = Arc::new(TimeGrid::from_times(times, &meas_times, None).expect("valid random grid"));
    let problem = Problem::from_parts(&parts, measurements, horizon).expect("consistent problem");
    let states: Vec<f64> = (0..grid.len() * n).map(|_| rng.random_range(-amplitude..amplitude)).collect();
    let path = DiscretePath::new(grid, n, states).expect("state count matches grid");
    (problem, path)
}

fn path_gradient_error(
    path: &DiscretePath,
    eval: impl Fn(&DiscretePath) -> Result<MeritValue, MeritError>,
) -> Result<f64, String> {
    let m = eval(path).map_err(|e| e.to_string())?;
    let analytic = m.gradient().ok_or("merit is -∞ at the test path")?.to_vec();
    let fd = fd_gradient(
        |x| {
            let p = path.with_states(x.to_vec()).expect("same state count");
            eval(&p).map(|v| v.value().to_f64()).unwrap_or(f64::NAN)
        },
        path.states(),
        FD_STEP,
    )
    .map_err(|e| e.to_string())?;
    Ok(relative_error(&analytic, &fd))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathFunctional {
    /// `R`.
    EulerEnergy,
    /// `S`.
    EulerMerit,
    /// `U`.
    TrapezoidalOm,
    /// `V`.
    TrapezoidalMerit,
}

impl GradSubject for PathFunctional {
    fn name(&self) -> &str {
        match self {
            PathFunctional::EulerEnergy => "euler_energy",
            PathFunctional::EulerMerit => "euler_merit",
            PathFunctional::TrapezoidalOm => "trapezoidal_om",
            PathFunctional::TrapezoidalMerit => "trapezoidal_merit",
        }
    }

    fn check_case(&self, rng: &mut ChaCha8Rng, max_segments: usize) -> Result<f64, String> {
        let (problem, path) = random_case(rng, max_segments);
        let (drift, diffusion) = (problem.drift.as_ref(), &problem.diffusion);
        match self {
            PathFunctional::EulerEnergy => path_gradient_error(&path, |p| euler_energy(p, drift, diffusion)),
            PathFunctional::EulerMerit => path_gradient_error(&path, |p| euler_merit(p, &problem)),
            PathFunctional::TrapezoidalOm => path_gradient_error(&path, |p| trapezoidal_om(p, drift, diffusion)),
            PathFunctional::TrapezoidalMerit => path_gradient_error(&path, |p| trapezoidal_merit(p, &problem)),
        }
    }
}

/// Student-t measurement log-likelihood as a function of a 2-dimensional
/// state.
#[derive(Debug, Clone, Copy)]
pub struct StudentTSubject;

impl GradSubject for StudentTSubject {
    fn name(&self) -> &str {
        "student_t_loglik"
    }

    fn check_case(&self, rng: &mut ChaCha8Rng, _max_segments: usize) -> Result<f64, String> {
        let lik = StudentTLikelihood { sigma_y: rng.random_range(0.1..2.0), component: rng.random_range(0..2), dim: 2 };
        let y = [rng.random_range(-5.0..5.0)];
        let x = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let analytic = lik.grad_log_likelihood(&y, &x);
        let fd = fd_gradient(|x| lik.log_likelihood(&y, x), &x, FD_STEP).map_err(|e| e.to_string())?;
        Ok(relative_error(analytic.as_slice(), &fd))
    }
}

pub fn standard_subjects() -> Vec<Box<dyn GradSubject>> {
    vec![
        Box::new(PathFunctional::EulerEnergy),
        Box::new(PathFunctional::EulerMerit),
        Box::new(PathFunctional::TrapezoidalOm),
        Box::new(PathFunctional::TrapezoidalMerit),
        Box::new(StudentTSubject),
    ]
}

/// Runs `cases` random cases of `subject`; case `i` draws from stream `i`
/// of `seed`.
pub fn check_subject(subject: &dyn GradSubject, cases: usize, max_segments: usize, tol: f64, seed: u64) -> GradReport {
    let mut max_rel_error: f64 = 0.0;
    let mut error = None;
    for i in 0..cases {
        let mut rng = RngStream::new(seed, i as u64).rng();
        match subject.check_case(&mut rng, max_segments) {
            Ok(e) => max_rel_error = max_rel_error.max(e),
            Err(e) => {
                error = Some(format!("case {i}: {e}"));
                break;
            }
        }
    }
    let passed = error.is_none() && max_rel_error <= tol;
    GradReport { name: subject.name().to_string(), cases, max_rel_error, error, passed }
}

pub fn gradient_suite(
    subjects: &[Box<dyn GradSubject>],
    cases: usize,
    max_segments: usize,
    tol: f64,
    seed: u64,
) -> Vec<GradReport> {
    subjects.iter().map(|s| check_subject(s.as_ref(), cases, max_segments, tol, seed)).collect()
}
