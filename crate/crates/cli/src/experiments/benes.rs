use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use rayon::ThreadPool;
use sdemap::functionals::MeritKind;
use sdemap::model::{builtin_model, GaussianObservation, Likelihood, MeasurementRecord, Measurements, ModelName, Problem};
use sdemap::optimizer::{convergence_study, ConvergenceStudy, StudyError, StudyOptions};

use super::{merit_for, write_path};
use crate::config::{parse_init, parse_kinds, ExperimentConfig};
use crate::output::{fmt_f64, write_atomic};
use crate::{runtime, CliError};

pub fn benes_problem(cfg: &ExperimentConfig) -> Result<Problem, CliError> {
    let b = &cfg.benes_convergence;
    let parts = builtin_model(ModelName::Benes, &cfg.model_params.params()).map_err(runtime)?;
    let mut records = Vec::with_capacity(b.measurements.len());
    for m in &b.measurements {
        let lik: Arc<dyn Likelihood> = Arc::new(GaussianObservation::scalar(0, m.variance).map_err(runtime)?);
        records.push(MeasurementRecord { time: m.time, value: vec![m.value], likelihood: lik });
    }
    Problem::from_parts(&parts, Measurements::new(records), b.horizon).map_err(runtime)
}

#[derive(Debug)]
pub struct KindStudy {
    pub kind: MeritKind,
    pub study: Result<ConvergenceStudy, StudyError>,
}

#[derive(Debug)]
pub struct BenesOutcome {
    pub studies: Vec<KindStudy>,
}

impl BenesOutcome {
    pub fn study(&self, kind: MeritKind) -> Option<&ConvergenceStudy> {
        self.studies.iter().find(|s| s.kind == kind).and_then(|s| s.study.as_ref().ok())
    }

    /// Sup-distance between the finest maximizers of two kinds over the
    /// finest grid.
    pub fn finest_distance(&self, a: MeritKind, b: MeritKind) -> Option<f64> {
        let (pa, pb) = (&self.study(a)?.finest().path, &self.study(b)?.finest().path);
        Some(pa.sup_distance(pb, pa.grid()))
    }
}

/// Solves the Beneš problem with every configured merit kind on the nested
/// levels and writes `paths_{kind}_{N}.csv`, `convergence.csv` and
/// `comparison.csv` to `out`. Kinds run concurrently on `pool`; a failing
/// kind is reported in `convergence.csv` and the others continue.
pub fn run_benes_convergence(cfg: &ExperimentConfig, out: &Path, pool: &ThreadPool) -> Result<BenesOutcome, CliError> {
    let b = &cfg.benes_convergence;
    let kinds = parse_kinds(&b.kinds)?;
    let problem = benes_problem(cfg)?;
    let opts = StudyOptions {
        levels: b.levels.clone(),
        optimizer: cfg.optimizer.options(),
        init: parse_init(&b.init)?,
        cold_start: true,
    };
    let studies: Vec<KindStudy> = pool.install(|| {
        kinds
            .par_iter()
            .map(|&kind| KindStudy { kind, study: convergence_study(&problem, &merit_for(kind), &opts) })
            .collect()
    });

    for s in &studies {
        match &s.study {
            Ok(study) => {
                for r in &study.records {
                    let name = format!("paths_{}_{}.csv", s.kind, r.segments);
                    write_atomic(&out.join(name), |w| write_path(w, &r.path))?;
                }
            }
            Err(e) => log::warn!("{} study failed: {e}", s.kind),
        }
    }

    write_atomic(&out.join("convergence.csv"), |w| {
        writeln!(w, "kind,N,sup_distance,merit,status,iterations,grad_norm,cold_start_merit,cold_start_distance")?;
        for s in &studies {
            match &s.study {
                Ok(study) => {
                    for r in &study.records {
                        let d = r.distance_to_finest.map(fmt_f64).unwrap_or_default();
                        let (cm, cd) = match &r.cold_start {
                            Some(Ok(c)) => (fmt_f64(c.merit), fmt_f64(c.distance)),
                            Some(Err(_)) => ("error".to_string(), String::new()),
                            None => (String::new(), String::new()),
                        };
                        writeln!(
                            w,
                            "{},{},{d},{},{},{},{},{cm},{cd}",
                            s.kind,
                            r.segments,
                            fmt_f64(r.merit),
                            r.status,
                            r.iterations,
                            fmt_f64(r.grad_norm)
                        )?;
                        if let Some(Ok(c)) = &r.cold_start {
                            if c.distance > 1e-3 {
                                log::warn!("{} N = {}: cold start reached a different maximizer", s.kind, r.segments);
                            }
                        }
                    }
                }
                Err(e) => {
                    let n = match e {
                        StudyError::Grid { segments, .. } | StudyError::Optimize { segments, .. } => segments.to_string(),
                        StudyError::InvalidLevels(_) => String::new(),
                    };
                    writeln!(w, "{},{n},,,error,,,,", s.kind)?;
                }
            }
        }
        Ok(())
    })?;

    let outcome = BenesOutcome { studies };
    write_atomic(&out.join("comparison.csv"), |w| {
        writeln!(w, "kind_a,kind_b,sup_distance")?;
        for (i, a) in kinds.iter().enumerate() {
            for b in &kinds[i + 1..] {
                if let Some(d) = outcome.finest_distance(*a, *b) {
                    writeln!(w, "{a},{b},{}", fmt_f64(d))?;
                }
            }
        }
        Ok(())
    })?;
    Ok(outcome)
}
