use std::path::Path;

use sdemap::model::{builtin_model, DiscretePath, ModelName};
use sdemap::simulate::{
    euler_maruyama, sample_gaussian, sample_measurements, strong_order_15, write_measurements_csv, write_path_csv,
    MeasurementSet, OutlierModel, RngStream, WienerSource,
};

use crate::config::ExperimentConfig;
use crate::output::write_atomic;
use crate::{runtime, CliError};

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub path: DiscretePath,
    pub measurements: MeasurementSet,
}

/// Simulates one path of the configured model from its initial law and
/// samples mixture measurements of it, using stream 0 of the master seed.
/// Writes `path.csv` and `measurements.csv` to `out`.
pub fn run_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<SimulateOutcome, CliError> {
    let s = &cfg.simulate;
    let name: ModelName = s.model.parse().map_err(runtime)?;
    let parts = builtin_model(name, &cfg.model_params.params()).map_err(runtime)?;
    let n = parts.drift.dim();
    let mut rng = RngStream::new(cfg.seed, 0).rng();
    let variances: Vec<f64> = (0..n).map(|i| 1.0 / parts.initial.precision()[(i, i)]).collect();
    let x0 = sample_gaussian(&mut rng, parts.initial.mean().as_slice(), &variances);
    let mut source = WienerSource::new(rng);
    let (drift, diffusion) = (parts.drift.as_ref(), &parts.diffusion);
    let path = if s.scheme == "euler" {
        euler_maruyama(drift, diffusion, &x0, s.step, s.horizon, &mut source)
    } else {
        strong_order_15(drift, diffusion, &x0, s.step, s.horizon, &mut source)
    }
    .map_err(runtime)?;
    let mut rng = source.into_inner();
    let m = &s.measurement;
    let model = OutlierModel { sigma_y: m.sigma_y, sigma_o: m.sigma_o, p_o: m.p_o };
    let measurements = sample_measurements(&path, m.step, &model, m.component, &mut rng).map_err(runtime)?;
    write_atomic(&out.join("path.csv"), |mut w| write_path_csv(&mut w, &path))?;
    write_atomic(&out.join("measurements.csv"), |mut w| write_measurements_csv(&mut w, &measurements))?;
    Ok(SimulateOutcome { path, measurements })
}
