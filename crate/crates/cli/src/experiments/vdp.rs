use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};
use sdemap::functionals::MeritKind;
use sdemap::model::{builtin_model, DiscretePath, Likelihood, ModelName, ModelParts, Problem};
use sdemap::optimizer::{initial_path, maximize_merit, InitStrategy, OptimizerOptions, Status};
use sdemap::simulate::{
    sample_gaussian, sample_measurements, strong_order_15, MeasurementSet, OutlierModel, RngStream,
    StudentTLikelihood, WienerSource,
};

use super::{merit_for, write_path};
use crate::config::{parse_init, parse_kinds, ExperimentConfig, VdpConfig};
use crate::ise::compute_ise;
use crate::output::{fmt_f64, write_atomic};
use crate::{runtime, CliError};

/// One row of `ise.csv`; `ise` is `None` when the estimation failed.
#[derive(Debug, Clone, PartialEq)]
pub struct IseRecord {
    pub replicate: usize,
    pub kind: MeritKind,
    pub ise: Option<f64>,
    pub status: String,
    pub iterations: usize,
    /// Wall-clock seconds; written to `timings.csv`, not `ise.csv`.
    pub runtime: f64,
}

#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub truth: DiscretePath,
    pub measurements: MeasurementSet,
    pub records: Vec<IseRecord>,
    pub estimates: Vec<Option<DiscretePath>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub count: usize,
    pub failures: usize,
    pub median: Option<f64>,
    pub p05: Option<f64>,
    pub p95: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VdpSummary {
    pub replicates: usize,
    pub kinds: BTreeMap<String, KindSummary>,
}

#[derive(Debug, Clone)]
pub struct VdpOutcome {
    pub records: Vec<IseRecord>,
    pub summary: VdpSummary,
    pub measurements: usize,
    pub outliers: usize,
}

impl VdpOutcome {
    pub fn outlier_fraction(&self) -> f64 {
        self.outliers as f64 / self.measurements as f64
    }
}

/// Linear interpolation between closest ranks of sorted data, `p ∈ [0, 1]`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-kind ISE statistics over the successful rows.
pub fn summarize(records: &[IseRecord]) -> VdpSummary {
    let mut by_kind: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    let mut replicates = 0;
    for r in records {
        replicates = replicates.max(r.replicate + 1);
        let entry = by_kind.entry(r.kind.to_string()).or_default();
        match r.ise {
            Some(v) => entry.0.push(v),
            None => entry.1 += 1,
        }
    }
    let kinds = by_kind
        .into_iter()
        .map(|(k, (mut v, failures))| {
            v.sort_by(f64::total_cmp);
            let stat = |p| (!v.is_empty()).then(|| percentile(&v, p));
            (k, KindSummary { count: v.len(), failures, median: stat(0.5), p05: stat(0.05), p95: stat(0.95) })
        })
        .collect();
    VdpSummary { replicates, kinds }
}

/// Rebuilds the summary from the text of `ise.csv`.
pub fn summary_from_csv(text: &str) -> Result<VdpSummary, CliError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = || CliError::Runtime(format!("ise.csv line {}: malformed row", i + 1));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(bad());
        }
        records.push(IseRecord {
            replicate: cols[0].parse().map_err(|_| bad())?,
            kind: cols[1].parse().map_err(|_| bad())?,
            ise: if cols[2].is_empty() { None } else { Some(cols[2].parse().map_err(|_| bad())?) },
            status: cols[3].to_string(),
            iterations: cols[4].parse().map_err(|_| bad())?,
            runtime: 0.0,
        });
    }
    Ok(summarize(&records))
}

struct Setup<'a> {
    cfg: &'a VdpConfig,
    parts: ModelParts,
    kinds: Vec<MeritKind>,
    init: InitStrategy,
    opts: OptimizerOptions,
    seed: u64,
}

/// Simulates replicate `r` on stream `r` of the master seed and estimates
/// it with each merit kind. Draw order: initial state, Brownian increments,
/// measurements.
fn replicate(setup: &Setup, r: usize) -> Result<ReplicateOutcome, CliError> {
    let cfg = setup.cfg;
    let mut rng = RngStream::new(setup.seed, r as u64).rng();
    let init = setup.parts.initial.as_ref();
    let variances: Vec<f64> = (0..2).map(|i| 1.0 / init.precision()[(i, i)]).collect();
    let x0 = sample_gaussian(&mut rng, init.mean().as_slice(), &variances);
    let mut source = WienerSource::new(rng);
    let truth = strong_order_15(
        setup.parts.drift.as_ref(),
        &setup.parts.diffusion,
        &x0,
        cfg.sim_step,
        cfg.horizon,
        &mut source,
    )
    .map_err(runtime)?;
    let mut rng = source.into_inner();
    let m = &cfg.measurement;
    let outlier = OutlierModel { sigma_y: m.sigma_y, sigma_o: m.sigma_o, p_o: m.p_o };
    let measurements = sample_measurements(&truth, m.step, &outlier, m.component, &mut rng).map_err(runtime)?;

    let lik: Arc<dyn Likelihood> =
        Arc::new(StudentTLikelihood { sigma_y: cfg.likelihood_sigma, component: m.component, dim: 2 });
    let problem = Problem::from_parts(&setup.parts, measurements.to_measurements(lik), cfg.horizon).map_err(runtime)?;
    let segments = ((cfg.horizon / cfg.estimation_step).round() as usize).max(1);
    let grid = problem.grid(segments).map_err(runtime)?;

    let mut records = Vec::with_capacity(setup.kinds.len());
    let mut estimates = Vec::with_capacity(setup.kinds.len());
    for &kind in &setup.kinds {
        let start = Instant::now();
        let result = initial_path(grid.clone(), &problem.measurements, problem.initial.as_ref(), setup.init)
            .and_then(|x0| maximize_merit(&problem, &merit_for(kind), &x0, &setup.opts));
        let runtime = start.elapsed().as_secs_f64();
        match result {
            Ok(res) => {
                if res.status != Status::Converged {
                    log::warn!("replicate {r}, {kind}: {} after {} iterations", res.status, res.iterations);
                }
                records.push(IseRecord {
                    replicate: r,
                    kind,
                    ise: Some(compute_ise(&truth, &res.path)),
                    status: res.status.to_string(),
                    iterations: res.iterations,
                    runtime,
                });
                estimates.push(Some(res.path));
            }
            Err(e) => {
                log::warn!("replicate {r}, {kind}: estimation failed: {e}");
                records.push(IseRecord { replicate: r, kind, ise: None, status: "failed".into(), iterations: 0, runtime });
                estimates.push(None);
            }
        }
    }
    Ok(ReplicateOutcome { replicate: r, truth, measurements, records, estimates })
}

/// Runs one replicate outside the batch driver.
pub fn run_replicate(cfg: &ExperimentConfig, r: usize) -> Result<ReplicateOutcome, CliError> {
    let setup = setup(cfg)?;
    replicate(&setup, r)
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup<'_>, CliError> {
    let v = &cfg.vdp_robust;
    let kinds = parse_kinds(&v.kinds)?;
    if kinds.contains(&MeritKind::Exact) {
        return Err(CliError::Config("the exact merit is not available for the Van der Pol model".into()));
    }
    Ok(Setup {
        cfg: v,
        parts: builtin_model(ModelName::VanDerPol, &cfg.model_params.params()).map_err(runtime)?,
        kinds,
        init: parse_init(&v.init)?,
        opts: cfg.optimizer.options(),
        seed: cfg.seed,
    })
}

/// Monte Carlo robustness study on the Van der Pol oscillator. Writes
/// `ise.csv`, `timings.csv`, `data.csv`, `summary.json` and the plot data of
/// replicate 0 (`truth_0.csv`, `estimate_{kind}_0.csv`) to `out`.
pub fn run_vdp_robust(cfg: &ExperimentConfig, out: &Path, pool: &ThreadPool) -> Result<VdpOutcome, CliError> {
    let setup = setup(cfg)?;
    let outcomes: Vec<Result<ReplicateOutcome, CliError>> =
        pool.install(|| (0..setup.cfg.replicates).into_par_iter().map(|r| replicate(&setup, r)).collect());

    let mut replicates = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        replicates.push(o?);
    }
    let records: Vec<IseRecord> = replicates.iter().flat_map(|o| o.records.iter().cloned()).collect();

    write_atomic(&out.join("ise.csv"), |w| {
        writeln!(w, "replicate,kind,ise,status,iterations")?;
        for r in &records {
            let ise = r.ise.map(fmt_f64).unwrap_or_default();
            writeln!(w, "{},{},{ise},{},{}", r.replicate, r.kind, r.status, r.iterations)?;
        }
        Ok(())
    })?;
    write_atomic(&out.join("timings.csv"), |w| {
        writeln!(w, "replicate,kind,runtime_s")?;
        for r in &records {
            writeln!(w, "{},{},{:.6}", r.replicate, r.kind, r.runtime)?;
        }
        Ok(())
    })?;
    write_atomic(&out.join("data.csv"), |w| {
        writeln!(w, "replicate,t,y,outlier_flag")?;
        for o in &replicates {
            let m = &o.measurements;
            for ((t, y), f) in m.times.iter().zip(&m.values).zip(&m.outlier) {
                writeln!(w, "{},{},{},{}", o.replicate, fmt_f64(*t), fmt_f64(*y), u8::from(*f))?;
            }
        }
        Ok(())
    })?;
    if let Some(first) = replicates.first() {
        write_atomic(&out.join("truth_0.csv"), |w| write_path(w, &first.truth))?;
        for (kind, est) in setup.kinds.iter().zip(&first.estimates) {
            if let Some(p) = est {
                write_atomic(&out.join(format!("estimate_{kind}_0.csv")), |w| write_path(w, p))?;
            }
        }
    }

    let summary = summarize(&records);
    let json = serde_json::to_string_pretty(&summary).map_err(runtime)?;
    write_atomic(&out.join("summary.json"), |w| writeln!(w, "{json}"))?;
    let measurements = replicates.iter().map(|o| o.measurements.len()).sum();
    let outliers = replicates.iter().map(|o| o.measurements.outlier_count()).sum();
    Ok(VdpOutcome { records, summary, measurements, outliers })
}
