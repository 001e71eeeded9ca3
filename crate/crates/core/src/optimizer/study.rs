use std::sync::Arc;

use thiserror::Error;

use super::{initial_path, maximize_merit, InitStrategy, OptimizeError, OptimizerOptions, Status};
use crate::functionals::DiscreteMerit;
use crate::model::{DiscretePath, ModelError, Problem, TimeGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StudyError {
    #[error("invalid grid levels: {0}")]
    InvalidLevels(String),
    #[error("level {level} (N = {segments}): {source}")]
    Grid {
        level: usize,
        segments: usize,
        #[source]
        source: ModelError,
    },
    #[error("level {level} (N = {segments}): {source}")]
    Optimize {
        level: usize,
        segments: usize,
        #[source]
        source: OptimizeError,
    },
}

#[derive(Debug, Clone)]
pub struct StudyOptions {
    /// Uniform segment counts, strictly increasing, each dividing the next.
    pub levels: Vec<usize>,
    pub optimizer: OptimizerOptions,
    /// Starting path of the coarsest level and of every cold start.
    pub init: InitStrategy,
    /// Also solve every level from `init` to detect mode switching.
    pub cold_start: bool,
}

/// Result of solving a level again from the initial strategy instead of the
/// upsampled coarser maximizer.
#[derive(Debug, Clone)]
pub struct ColdStart {
    pub merit: f64,
    pub iterations: usize,
    pub status: Status,
    /// Sup-distance to the warm-started maximizer at this level's grid points.
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct LevelRecord {
    pub segments: usize,
    pub path: DiscretePath,
    pub merit: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: Status,
    /// Sup-distance to the finest maximizer on the coarsest grid's points;
    /// `None` for the finest level itself.
    pub distance_to_finest: Option<f64>,
    pub cold_start: Option<Result<ColdStart, OptimizeError>>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub records: Vec<LevelRecord>,
}

impl ConvergenceStudy {
    pub fn finest(&self) -> &LevelRecord {
        self.records.last().expect("a study has at least one level")
    }

    /// Distances of all but the finest level, coarsest first.
    pub fn distances(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.distance_to_finest).collect()
    }
}

fn check_levels(levels: &[usize]) -> Result<(), StudyError> {
    if levels.is_empty() {
        return Err(StudyError::InvalidLevels("no levels given".into()));
    }
    if levels[0] == 0 {
        return Err(StudyError::InvalidLevels("segment counts must be positive".into()));
    }
    for w in levels.windows(2) {
        if w[1] <= w[0] || w[1] % w[0] != 0 {
            return Err(StudyError::InvalidLevels(format!(
                "{} does not strictly refine {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

/// Solves the merit on nested uniform grids, warm-starting each level from
/// the previous maximizer resampled by linear interpolation.
pub fn convergence_study(
    problem: &Problem,
    merit: &DiscreteMerit,
    opts: &StudyOptions,
) -> Result<ConvergenceStudy, StudyError> {
    check_levels(&opts.levels)?;
    let mut grids: Vec<Arc<TimeGrid>> = Vec::with_capacity(opts.levels.len());
    for (level, &segments) in opts.levels.iter().enumerate() {
        let grid = problem.grid(segments).map_err(|source| StudyError::Grid { level, segments, source })?;
        if let Some(prev) = grids.last() {
            if !grid.contains_grid(prev) {
                return Err(StudyError::InvalidLevels(format!(
                    "grid for N = {segments} does not contain the previous level's points"
                )));
            }
        }
        grids.push(grid);
    }

    let mut records: Vec<LevelRecord> = Vec::with_capacity(grids.len());
    for (level, grid) in grids.iter().enumerate() {
        let segments = opts.levels[level];
        let wrap = |source| StudyError::Optimize { level, segments, source };
        let start = match records.last() {
            Some(prev) => prev.path.resample(grid.clone()),
            None => initial_path(grid.clone(), &problem.measurements, problem.initial.as_ref(), opts.init)
                .map_err(wrap)?,
        };
        let warm = maximize_merit(problem, merit, &start, &opts.optimizer).map_err(wrap)?;
        let cold_start = (opts.cold_start && level > 0).then(|| {
            let start = initial_path(grid.clone(), &problem.measurements, problem.initial.as_ref(), opts.init)?;
            let cold = maximize_merit(problem, merit, &start, &opts.optimizer)?;
            Ok(ColdStart {
                merit: cold.merit,
                iterations: cold.iterations,
                status: cold.status,
                distance: cold.path.sup_distance(&warm.path, grid),
            })
        });
        records.push(LevelRecord {
            segments,
            path: warm.path,
            merit: warm.merit,
            grad_norm: warm.grad_norm,
            iterations: warm.iterations,
            status: warm.status,
            distance_to_finest: None,
            cold_start,
        });
    }

    let coarsest = grids[0].clone();
    let finest = records.last().expect("levels checked non-empty").path.clone();
    let last = records.len() - 1;
    for r in &mut records[..last] {
        r.distance_to_finest = Some(r.path.sup_distance(&finest, &coarsest));
    }
    Ok(ConvergenceStudy { records })
}
