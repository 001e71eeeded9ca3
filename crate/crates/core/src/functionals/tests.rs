use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use super::*;
use crate::model::{
    builtin_model, BumpDensity, DiscretePath, Diffusion, Drift, GaussianDensity, GaussianObservation, Measurements,
    ModelName, ModelParams, Problem, TimeGrid,
};
use crate::oracle::{fd_gradient, relative_error, BenesTransition};

#[derive(Debug)]
struct Zero(usize);

impl Drift for Zero {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, _t: f64, _x: &[f64]) -> DVector<f64> {
        DVector::zeros(self.0)
    }
    fn jacobian(&self, _t: f64, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(self.0, self.0)
    }
    fn divergence(&self, _t: f64, _x: &[f64]) -> f64 {
        0.0
    }
}

/// Scalar `f(x) = c x`.
struct Linear(f64);

impl Drift for Linear {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, _t: f64, x: &[f64]) -> DVector<f64> {
        DVector::from_element(1, self.0 * x[0])
    }
    fn jacobian(&self, _t: f64, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.0)
    }
    fn divergence(&self, _t: f64, _x: &[f64]) -> f64 {
        self.0
    }
}

/// Time-varying 2-D drift that relies on the finite-difference
/// `jacobian_derivative` fallback.
struct Swirl;

impl Drift for Swirl {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, t: f64, x: &[f64]) -> DVector<f64> {
        DVector::from_vec(vec![
            x[1].sin() - 0.3 * x[0] + 0.1 * t,
            -x[0] * x[1] * 0.5 + (0.5 * x[0]).cos(),
        ])
    }
    fn jacobian(&self, _t: f64, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[-0.3, x[1].cos(), -0.5 * x[1] - 0.5 * (0.5 * x[0]).sin(), -0.5 * x[0]],
        )
    }
    fn divergence(&self, _t: f64, x: &[f64]) -> f64 {
        -0.3 - 0.5 * x[0]
    }
}

fn grid(times: &[f64]) -> Arc<TimeGrid> {
    Arc::new(TimeGrid::from_times(times.to_vec(), &[], None).unwrap())
}

fn path(times: &[f64], dim: usize, states: &[f64]) -> DiscretePath {
    DiscretePath::new(grid(times), dim, states.to_vec()).unwrap()
}

fn unit() -> Diffusion {
    Diffusion::scaled_identity(1, 1.0).unwrap()
}

fn std_normal_problem(drift: Arc<dyn Drift>, measurements: Measurements, horizon: f64) -> Problem {
    let n = drift.dim();
    Problem::new(
        drift,
        Diffusion::scaled_identity(n, 1.0).unwrap(),
        Arc::new(GaussianDensity::isotropic(n, 1.0).unwrap()),
        measurements,
        horizon,
    )
    .unwrap()
}

fn value(m: Result<MeritValue, MeritError>) -> f64 {
    m.unwrap().finite_value().unwrap()
}

fn half_ln_2pi() -> f64 {
    0.5 * (2.0 * PI).ln()
}

#[test]
fn euler_energy_examples() {
    let p = path(&[0.0, 1.0], 1, &[0.0, 2.0]);
    assert_eq!(value(euler_energy(&p, &Zero(1), &unit())), -2.0);

    let p = path(&[0.0, 0.2, 0.7, 1.5], 1, &[0.4; 4]);
    assert_eq!(value(euler_energy(&p, &Zero(1), &unit())), 0.0);

    let benes = builtin_model(ModelName::Benes, &ModelParams::default()).unwrap();
    let p = path(&[0.0, 0.5], 1, &[0.0, 1.0]);
    assert!((value(euler_energy(&p, benes.drift.as_ref(), &unit())) + 1.0).abs() < 1e-15);
}

#[test]
fn euler_merit_examples() {
    let problem = std_normal_problem(Arc::new(Zero(1)), Measurements::empty(), 1.0);
    let p = path(&[0.0, 0.5, 1.0], 1, &[0.0; 3]);
    let v = value(euler_merit(&p, &problem));
    assert!((v + half_ln_2pi()).abs() < 1e-15);
    assert!((v + 0.918939).abs() < 1e-6);

    let lik = Arc::new(GaussianObservation::scalar(0, 1.0).unwrap());
    let meas = Measurements::with_shared(&[1.0], &[vec![0.0]], lik);
    let problem = std_normal_problem(Arc::new(Zero(1)), meas, 1.0);
    let v = value(euler_merit(&p, &problem));
    assert!((v + 1.837877).abs() < 1e-6);
}

fn benes_fig1_problem() -> Problem {
    let parts = builtin_model(ModelName::Benes, &ModelParams::default()).unwrap();
    let lik = Arc::new(GaussianObservation::scalar(0, 0.16).unwrap());
    Problem::from_parts(&parts, Measurements::with_shared(&[5.0], &[vec![1.5]], lik), 5.0).unwrap()
}

#[test]
fn euler_merit_matches_independent_summation() {
    let problem = benes_fig1_problem();
    let g = problem.grid(4).unwrap();
    let xs = [0.05, 0.31, 0.77, 1.12, 1.43];
    let p = DiscretePath::new(g, 1, xs.to_vec()).unwrap();
    let got = value(euler_merit(&p, &problem));

    let d = 1.25;
    let mut expect = 0.0;
    for k in 0..4 {
        let r = (xs[k + 1] - xs[k]) / d - xs[k].tanh();
        expect -= 0.5 * d * r * r;
    }
    expect += -0.5 * (2.0 * PI * 0.16).ln() - xs[0] * xs[0] / 0.32;
    expect += -0.5 * (2.0 * PI * 0.16).ln() - (1.5 - xs[4]) * (1.5 - xs[4]) / 0.32;
    assert!((got - expect).abs() < 1e-10);
}

#[test]
fn trapezoidal_om_examples() {
    let p = path(&[0.0, 0.5], 1, &[0.0, 1.0]);
    let v = value(trapezoidal_om(&p, &Linear(1.0), &unit()));
    let expect = 0.75f64.ln() - 0.5 * 0.5 * (2.0 - 0.5) * (2.0 - 0.5);
    assert!((v - expect).abs() < 1e-15);
    assert!((v + 0.850182).abs() < 1e-6);

    let vdp = builtin_model(ModelName::VanDerPol, &ModelParams::default()).unwrap();
    let p = path(&[0.0, 0.01], 2, &[0.0; 4]);
    let v = value(trapezoidal_om(&p, vdp.drift.as_ref(), &vdp.diffusion));
    let det: f64 = 1.0 * (1.0 - 0.01) + 0.005 * 0.005;
    assert!((v - det.ln()).abs() < 1e-15);
    assert!((v + 0.010025).abs() < 1e-6);
}

#[test]
fn zero_drift_trapezoidal_equals_euler() {
    let p = path(&[0.0, 0.3, 0.4, 1.0], 2, &[0.1, -0.2, 0.5, 0.3, -0.7, 0.9, 0.0, 1.2]);
    let d = Diffusion::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 0.7])).unwrap();
    let e = euler_energy(&p, &Zero(2), &d).unwrap();
    let t = trapezoidal_om(&p, &Zero(2), &d).unwrap();
    assert_eq!(e, t);

    let problem = std_normal_problem(Arc::new(Zero(1)), Measurements::empty(), 1.0);
    let p = path(&[0.0, 0.5, 1.0], 1, &[0.0; 3]);
    assert!((value(trapezoidal_merit(&p, &problem)) + half_ln_2pi()).abs() < 1e-15);
}

#[test]
fn non_positive_determinant_is_an_error() {
    // 1 - ½·c·δ = 1 - ½·4·1 < 0
    let p = path(&[0.0, 1.0], 1, &[0.0, 1.0]);
    let err = trapezoidal_om(&p, &Linear(4.0), &unit()).unwrap_err();
    assert!(matches!(err, MeritError::NonPositiveDeterminant { segment: 0, .. }));
    assert!(err.to_string().contains("refine"));
}

#[test]
fn zero_density_gives_negative_infinity() {
    let drift: Arc<dyn Drift> = Arc::new(Zero(1));
    let problem = Problem::new(
        drift,
        unit(),
        Arc::new(BumpDensity::new(DVector::zeros(1), 1.0)),
        Measurements::empty(),
        1.0,
    )
    .unwrap();
    let outside = path(&[0.0, 1.0], 1, &[1.5, 0.0]);
    for kind in [DiscreteMerit::Euler, DiscreteMerit::Trapezoidal, DiscreteMerit::TrapezoidalEnergy] {
        let m = kind.evaluate(outside.grid(), &problem, outside.states()).unwrap();
        assert_eq!(m, MeritValue::NegInfinity);
        assert!(m.gradient().is_none());
    }
    let rule = QuadratureRule::three_point();
    assert_eq!(map_merit(&outside, &problem, &rule).unwrap(), ExtReal::NegInfinity);
    let inside = path(&[0.0, 1.0], 1, &[0.5, 0.0]);
    assert!(euler_merit(&inside, &problem).unwrap().finite_value().is_some());
}

#[test]
fn off_grid_measurement_is_an_error() {
    let lik = Arc::new(GaussianObservation::scalar(0, 1.0).unwrap());
    let problem = std_normal_problem(Arc::new(Zero(1)), Measurements::with_shared(&[0.3], &[vec![0.0]], lik), 1.0);
    let p = path(&[0.0, 0.5, 1.0], 1, &[0.0; 3]);
    assert!(matches!(euler_merit(&p, &problem), Err(MeritError::MeasurementOffGrid { .. })));
}

#[test]
fn exact_merit_single_step() {
    let problem = Problem::new(
        Arc::new(crate::model::Benes),
        unit(),
        Arc::new(GaussianDensity::isotropic(1, 1.0).unwrap()),
        Measurements::empty(),
        1.0,
    )
    .unwrap();
    let p = path(&[0.0, 1.0], 1, &[0.0, 0.0]);
    let v = value(exact_merit(&p, &BenesTransition, &problem));
    assert!((v - (-0.5 - 2.0 * half_ln_2pi())).abs() < 1e-14);
}

#[test]
fn continuous_examples() {
    let rule = QuadratureRule::three_point();
    let p = path(&[0.0, 0.25, 1.0], 1, &[0.0, 0.25, 1.0]);
    assert!((continuous_energy(&p, &Zero(1), &unit(), &rule) + 0.5).abs() < 1e-15);
    assert_eq!(continuous_om(&p, &Zero(1), &unit(), &rule), continuous_energy(&p, &Zero(1), &unit(), &rule));

    let benes = builtin_model(ModelName::Benes, &ModelParams::default()).unwrap();
    let p = path(&[0.0, 1.0, 3.0], 1, &[0.0; 3]);
    assert_eq!(continuous_energy(&p, benes.drift.as_ref(), &unit(), &rule), 0.0);

    // div f = c constant: J = J_e - cT/2
    let p = path(&[0.0, 0.7, 2.0], 1, &[0.3, -0.4, 1.0]);
    let c = -1.3;
    let gap = continuous_om(&p, &Linear(c), &unit(), &rule) - continuous_energy(&p, &Linear(c), &unit(), &rule);
    assert!((gap + 0.5 * c * 2.0).abs() < 1e-14);

    let vdp = builtin_model(ModelName::VanDerPol, &ModelParams::default()).unwrap();
    let g = Arc::new(TimeGrid::uniform(16.0, 64, &[]).unwrap());
    let p = DiscretePath::zeros(g, 2);
    let gap = continuous_om(&p, vdp.drift.as_ref(), &vdp.diffusion, &rule)
        - continuous_energy(&p, vdp.drift.as_ref(), &vdp.diffusion, &rule);
    assert!((gap + 16.0).abs() < 1e-12);
}

#[test]
fn quadrature_weights_sum_to_segment_length() {
    for rule in [QuadratureRule::three_point(), QuadratureRule::seven_point()] {
        let w: Vec<f64> = rule.on_segment(0.3, 1.1).map(|(_, w)| w).collect();
        assert!(w.iter().all(|&w| w > 0.0));
        assert!((w.iter().sum::<f64>() - 0.8).abs() < 1e-15);
    }
    assert_eq!(QuadratureRule::default().points(), 3);
}

#[test]
fn three_and_seven_point_rules_agree_on_fine_sin_path() {
    let benes = builtin_model(ModelName::Benes, &ModelParams::default()).unwrap();
    let g = Arc::new(TimeGrid::uniform(5.0, 512, &[]).unwrap());
    let p = DiscretePath::from_fn(g, 1, |t| vec![t.sin()]);
    let report = crate::oracle::quadrature_refine_check(&p, benes.drift.as_ref(), &benes.diffusion);
    assert!(report.energy_difference() <= 1e-6, "{report:?}");
    assert!(report.om_difference() <= 1e-6, "{report:?}");
}

#[test]
fn linear_drift_quadrature_is_exact() {
    let g = Arc::new(TimeGrid::uniform(2.0, 7, &[]).unwrap());
    let p = DiscretePath::from_fn(g, 1, |t| vec![(3.0 * t).cos()]);
    let report = crate::oracle::quadrature_refine_check(&p, &Linear(-0.8), &unit());
    assert!(report.energy_difference() < 1e-13);
    assert!(report.om_difference() < 1e-13);
}

#[test]
fn map_minus_energy_merit_is_om_minus_energy() {
    let problem = benes_fig1_problem();
    let g = problem.grid(50).unwrap();
    let p = DiscretePath::from_fn(g, 1, |t| vec![0.3 * t - 0.2 * (2.0 * t).sin()]);
    let rule = QuadratureRule::three_point();
    let h = map_merit(&p, &problem, &rule).unwrap().to_f64();
    let he = energy_merit(&p, &problem, &rule).unwrap().to_f64();
    let j = continuous_om(&p, problem.drift.as_ref(), &problem.diffusion, &rule);
    let je = continuous_energy(&p, problem.drift.as_ref(), &problem.diffusion, &rule);
    assert!(((h - he) - (j - je)).abs() < 1e-12);

    let zero = std_normal_problem(Arc::new(Zero(1)), Measurements::empty(), 1.0);
    let p = path(&[0.0, 1.0], 1, &[0.0, 0.0]);
    assert!((map_merit(&p, &zero, &rule).unwrap().to_f64() + half_ln_2pi()).abs() < 1e-15);
    assert!((energy_merit(&p, &zero, &rule).unwrap().to_f64() + half_ln_2pi()).abs() < 1e-15);
}

#[test]
fn merit_kind_round_trip() {
    for kind in [MeritKind::Euler, MeritKind::Trapezoidal, MeritKind::TrapezoidalEnergy, MeritKind::Exact] {
        assert_eq!(kind.as_str().parse::<MeritKind>().unwrap(), kind);
    }
    assert!("midpoint".parse::<MeritKind>().is_err());
}

fn check_gradient(kind: &DiscreteMerit, problem: &Problem, p: &DiscretePath) -> f64 {
    let m = kind.evaluate(p.grid(), problem, p.states()).unwrap();
    let analytic = m.gradient().expect("finite merit").to_vec();
    let fd = fd_gradient(
        |x| kind.evaluate(p.grid(), problem, x).unwrap().value().to_f64(),
        p.states(),
        1e-6,
    )
    .unwrap();
    relative_error(&analytic, &fd)
}

fn random_grid(horizon: f64, gaps: &[f64]) -> Arc<TimeGrid> {
    let total: f64 = gaps.iter().sum();
    let mut t = 0.0;
    let mut times = vec![0.0];
    for g in &gaps[..gaps.len() - 1] {
        t += horizon * g / total;
        times.push(t);
    }
    times.push(horizon);
    Arc::new(TimeGrid::from_times(times, &[], None).unwrap())
}

fn problem_with_measurements(model: ModelName, grid: &TimeGrid, values: &[f64]) -> Problem {
    let parts = builtin_model(model, &ModelParams::default()).unwrap();
    let lik = Arc::new(GaussianObservation::scalar(0, 0.25).unwrap());
    let idx = [grid.len() / 3, grid.len() - 1];
    let times: Vec<f64> = idx.iter().map(|&k| grid.times()[k]).collect();
    let ys: Vec<Vec<f64>> = values.iter().take(2).map(|&v| vec![v]).collect();
    Problem::from_parts(&parts, Measurements::with_shared(&times, &ys, lik), grid.horizon()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn discrete_gradients_match_finite_differences(
        gaps in prop::collection::vec(0.2f64..1.0, 2..=50),
        seed_states in prop::collection::vec(-1.5f64..1.5, 102),
        ys in prop::collection::vec(-1.0f64..1.0, 2),
        vdp in any::<bool>(),
    ) {
        let (model, n, horizon) = if vdp { (ModelName::VanDerPol, 2, 0.2) } else { (ModelName::Benes, 1, 3.0) };
        let g = random_grid(horizon, &gaps);
        let states: Vec<f64> = seed_states.iter().cycle().take(g.len() * n).copied().collect();
        let p = DiscretePath::new(g.clone(), n, states).unwrap();
        let problem = problem_with_measurements(model, &g, &ys);
        for kind in [DiscreteMerit::Euler, DiscreteMerit::Trapezoidal, DiscreteMerit::TrapezoidalEnergy] {
            let err = check_gradient(&kind, &problem, &p);
            prop_assert!(err <= 1e-6, "{kind:?}: {err}");
        }
        if !vdp {
            let err = check_gradient(&DiscreteMerit::Exact(Arc::new(BenesTransition)), &problem, &p);
            prop_assert!(err <= 1e-6, "exact: {err}");
        }
    }

    #[test]
    fn fd_fallback_gradient_for_user_drift(
        gaps in prop::collection::vec(0.2f64..1.0, 2..=20),
        seed_states in prop::collection::vec(-1.0f64..1.0, 42),
    ) {
        let g = random_grid(1.0, &gaps);
        let states: Vec<f64> = seed_states.iter().cycle().take(g.len() * 2).copied().collect();
        let p = DiscretePath::new(g, 2, states).unwrap();
        let problem = std_normal_problem(Arc::new(Swirl), Measurements::empty(), 1.0);
        let err = check_gradient(&DiscreteMerit::Trapezoidal, &problem, &p);
        // the Jacobian derivative itself comes from differences here
        prop_assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn zero_jacobian_euler_equals_trapezoidal(
        gaps in prop::collection::vec(0.05f64..1.0, 1..=30),
        seed_states in prop::collection::vec(-3.0f64..3.0, 62),
    ) {
        let g = random_grid(2.0, &gaps);
        let states: Vec<f64> = seed_states.iter().cycle().take(g.len() * 2).copied().collect();
        let problem = std_normal_problem(Arc::new(Zero(2)), Measurements::empty(), 2.0);
        let s = DiscreteMerit::Euler.evaluate(&g, &problem, &states).unwrap();
        let v = DiscreteMerit::Trapezoidal.evaluate(&g, &problem, &states).unwrap();
        prop_assert_eq!(s, v);
    }
}
