use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::OptimizeError;
use crate::model::{DiscretePath, InitialDensity, Measurements, TimeGrid};

/// How to build the starting path of an optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitStrategy {
    /// Constant path at the mode of the initial density.
    PriorMean,
    /// Piecewise-linear interpolation of the measurements on their observed
    /// components, anchored at the prior mode at `t = 0` when no measurement
    /// is taken there; unobserved components stay at the prior mode.
    MeasInterp,
}

impl InitStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            InitStrategy::PriorMean => "prior_mean",
            InitStrategy::MeasInterp => "meas_interp",
        }
    }
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InitStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prior_mean" => Ok(InitStrategy::PriorMean),
            "meas_interp" => Ok(InitStrategy::MeasInterp),
            other => Err(format!("unknown initialization strategy '{other}'")),
        }
    }
}

fn interpolate(anchors: &[(f64, f64)], t: f64) -> f64 {
    let first = anchors[0];
    let last = anchors[anchors.len() - 1];
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let j = anchors.partition_point(|a| a.0 <= t);
    let (t0, v0) = anchors[j - 1];
    let (t1, v1) = anchors[j];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

pub fn initial_path(
    grid: Arc<TimeGrid>,
    measurements: &Measurements,
    initial: &dyn InitialDensity,
    strategy: InitStrategy,
) -> Result<DiscretePath, OptimizeError> {
    let n = initial.dim();
    let mode = initial.mode();
    match strategy {
        InitStrategy::PriorMean => Ok(DiscretePath::from_fn(grid, n, |_| mode.iter().copied().collect())),
        InitStrategy::MeasInterp => {
            if measurements.is_empty() {
                return Err(OptimizeError::Init("measurement interpolation needs at least one measurement".into()));
            }
            let mut anchors: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n];
            for rec in measurements.records() {
                for (j, c) in rec.likelihood.observed_components().into_iter().enumerate() {
                    if c < n && j < rec.value.len() {
                        anchors[c].push((rec.time, rec.value[j]));
                    }
                }
            }
            for (c, list) in anchors.iter_mut().enumerate() {
                if list.is_empty() {
                    continue;
                }
                list.sort_by(|a, b| a.0.total_cmp(&b.0));
                if list[0].0 > 0.0 {
                    list.insert(0, (0.0, mode[c]));
                }
            }
            Ok(DiscretePath::from_fn(grid, n, |t| {
                (0..n)
                    .map(|c| if anchors[c].is_empty() { mode[c] } else { interpolate(&anchors[c], t) })
                    .collect()
            }))
        }
    }
}
