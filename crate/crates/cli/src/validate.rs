//! Self-checks run by the `validate` subcommand.

use std::sync::Arc;

use sdemap::functionals::DiscreteMerit;
use sdemap::model::{
    builtin_model, validate_model, GaussianObservation, Measurements, ModelName, ModelParams, Problem, TimeGrid,
};
use sdemap::optimizer::{initial_path, maximize_merit, InitStrategy, OptimizerOptions};
use sdemap::oracle::{
    benes_em_samples, benes_normalization, benes_transition_cdf, ks_distance, rts_smoother, LinearGaussianSpec,
    LinearMeasurement,
};

use crate::gradcheck::{gradient_suite, GradSubject};

pub const OU_TIMES: [f64; 5] = [0.25, 0.75, 1.0, 1.5, 2.0];
pub const OU_VALUES: [f64; 5] = [0.8, 0.3, -0.4, 0.1, 0.9];
pub const OU_NOISE: f64 = 0.2;

/// OU model `dX = -X dt + dW`, `X₀ ~ N(0, 1)`, on `[0, 2]` with five
/// Gaussian measurements of variance 0.2.
pub fn ou_problem() -> Problem {
    let parts = builtin_model(ModelName::OrnsteinUhlenbeck, &ModelParams::default()).expect("default OU model");
    let lik = Arc::new(GaussianObservation::scalar(0, OU_NOISE).expect("positive variance"));
    let values: Vec<Vec<f64>> = OU_VALUES.iter().map(|&v| vec![v]).collect();
    Problem::from_parts(&parts, Measurements::with_shared(&OU_TIMES, &values, lik), 2.0).expect("consistent problem")
}

/// RTS smoother means of [`ou_problem`] at the points of `grid`.
pub fn ou_smoother_means(grid: &TimeGrid) -> Result<Vec<f64>, String> {
    let spec = LinearGaussianSpec::ou(1.0, 1.0, 1.0);
    let meas: Vec<_> = OU_TIMES
        .iter()
        .zip(OU_VALUES)
        .map(|(&t, y)| LinearMeasurement::observe(t, &[y], &[0], &[OU_NOISE], 1))
        .collect();
    rts_smoother(&spec, grid, &meas).map(|s| s.flat_means()).map_err(|e| e.to_string())
}

/// Sup-distance between the maximizer of `merit` for [`ou_problem`] on `N`
/// uniform segments and the RTS smoother means.
pub fn ou_oracle_distance(merit: &DiscreteMerit, segments: usize) -> Result<f64, String> {
    let problem = ou_problem();
    let grid = problem.grid(segments).map_err(|e| e.to_string())?;
    let x0 = initial_path(grid.clone(), &problem.measurements, problem.initial.as_ref(), InitStrategy::PriorMean)
        .map_err(|e| e.to_string())?;
    let out = maximize_merit(&problem, merit, &x0, &OptimizerOptions::default()).map_err(|e| e.to_string())?;
    let means = ou_smoother_means(&grid)?;
    Ok(out.path.states().iter().zip(&means).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSummary {
    pub checks: Vec<CheckResult>,
}

impl ValidationSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_names(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

fn check(name: impl Into<String>, passed: bool, detail: String) -> CheckResult {
    CheckResult { name: name.into(), passed, detail }
}

/// Model validation, gradient cross-checks of `subjects`, Beneš density
/// validation and the OU smoother equivalence.
pub fn run_validate(subjects: &[Box<dyn GradSubject>], seed: u64) -> ValidationSummary {
    let mut checks = Vec::new();

    for name in [ModelName::Benes, ModelName::VanDerPol, ModelName::OrnsteinUhlenbeck] {
        let parts = builtin_model(name, &ModelParams::default()).expect("default parameters are valid");
        let r = validate_model(parts.drift.as_ref(), 200, seed);
        checks.push(check(
            format!("model_{name}"),
            r.passed,
            format!("divergence err {:.2e}, jacobian err {:.2e}", r.max_divergence_error, r.max_jacobian_error),
        ));
    }

    for r in gradient_suite(subjects, 20, 30, 1e-6, seed) {
        let detail = match &r.error {
            Some(e) => e.clone(),
            None => format!("max rel err {:.2e} over {} cases", r.max_rel_error, r.cases),
        };
        checks.push(check(format!("gradient_{}", r.name), r.passed, detail));
    }

    let mut worst: f64 = 0.0;
    for from in [0.0, 1.0] {
        for delta in [0.5, 1.0] {
            worst = worst.max((benes_normalization(from, delta, 10.0, 20_001) - 1.0).abs());
        }
    }
    checks.push(check("benes_normalization", worst <= 1e-4, format!("max |∫p - 1| {worst:.2e}")));

    let mut samples = benes_em_samples(0.0, 1.0, 1e-3, 20_000, seed);
    let ks = ks_distance(&mut samples, |x| benes_transition_cdf(0.0, 1.0, x));
    checks.push(check("benes_ks", ks <= 0.02, format!("KS {ks:.4} (20000 samples, h = 1e-3)")));

    match ou_oracle_distance(&DiscreteMerit::Trapezoidal, 256) {
        Ok(d) => checks.push(check("rts_equivalence", d <= 1e-3, format!("sup distance {d:.2e} at N = 256"))),
        Err(e) => checks.push(check("rts_equivalence", false, e)),
    }
    ValidationSummary { checks }
}
