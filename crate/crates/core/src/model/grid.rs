//! Time partitions of the estimation horizon.

use super::ModelError;

/// Relative tolerance used to decide that a measurement instant coincides
/// with an existing partition point.
const SNAP_TOL: f64 = 1e-9;

/// Ordered partition `0 = t_0 < t_1 < ... < t_N = T` that contains every
/// measurement instant.
///
/// `meas_index[j]` is the position in `times` of the `j`-th measurement
/// instant handed to the constructor. The product of the segment count and
/// the mesh is bounded by `bound` (10·T unless overridden).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    meas_index: Vec<usize>,
    bound: f64,
}

impl TimeGrid {
    /// `N` equal segments on `[0, T]` with `meas_times` merged in.
    ///
    /// Measurement instants that fall on a uniform point (up to a relative
    /// tolerance of 1e-9) reuse it; the others are inserted, so the grid may
    /// end up with more than `N + 1` points.
    pub fn uniform(horizon: f64, segments: usize, meas_times: &[f64]) -> Result<Self, ModelError> {
        Self::uniform_with_bound(horizon, segments, meas_times, 10.0 * horizon)
    }

    pub fn uniform_with_bound(
        horizon: f64,
        segments: usize,
        meas_times: &[f64],
        bound: f64,
    ) -> Result<Self, ModelError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(ModelError::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if segments == 0 {
            return Err(ModelError::InvalidGrid("segment count must be at least 1".into()));
        }
        let mut times: Vec<f64> = (0..=segments)
            .map(|k| horizon * k as f64 / segments as f64)
            .collect();
        times[segments] = horizon;
        Self::merge(times, meas_times, bound)
    }

    /// Builds a grid from explicit partition points (which must start at 0
    /// and be strictly increasing) and merges the measurement instants.
    pub fn from_times(times: Vec<f64>, meas_times: &[f64], bound: Option<f64>) -> Result<Self, ModelError> {
        let horizon = *times
            .last()
            .ok_or_else(|| ModelError::InvalidGrid("empty partition".into()))?;
        Self::merge(times, meas_times, bound.unwrap_or(10.0 * horizon))
    }

    fn merge(mut times: Vec<f64>, meas_times: &[f64], bound: f64) -> Result<Self, ModelError> {
        if times.len() < 2 || times[0] != 0.0 {
            return Err(ModelError::InvalidGrid("partition must start at 0 and have a segment".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ModelError::InvalidGrid("partition must be strictly increasing".into()));
        }
        let horizon = *times.last().unwrap();
        let tol = SNAP_TOL * horizon.max(1.0);
        for &m in meas_times {
            if !(m >= -tol && m <= horizon + tol) {
                return Err(ModelError::MeasurementOutsideHorizon { time: m, horizon });
            }
            let pos = times.partition_point(|&t| t < m);
            let near = |i: usize| times.get(i).is_some_and(|&t| (t - m).abs() <= tol);
            if !(near(pos) || (pos > 0 && near(pos - 1))) {
                times.insert(pos, m);
            }
        }
        let meas_index = meas_times
            .iter()
            .map(|&m| nearest_index(&times, m))
            .collect();
        let grid = TimeGrid { times, meas_index, bound };
        grid.check_bound()?;
        Ok(grid)
    }

    fn check_bound(&self) -> Result<(), ModelError> {
        let product = self.segments() as f64 * self.mesh();
        if !(product < self.bound) {
            return Err(ModelError::MeshBoundViolated { product, bound: self.bound });
        }
        Ok(())
    }

    /// Splits every segment into `factor` equal parts. The result contains
    /// every point of `self` and keeps measurement instants addressable.
    pub fn refine(&self, factor: usize) -> Result<Self, ModelError> {
        if factor < 2 {
            return Err(ModelError::InvalidGrid(format!("refinement factor must be >= 2, got {factor}")));
        }
        let mut times = Vec::with_capacity(self.segments() * factor + 1);
        for w in self.times.windows(2) {
            let (a, b) = (w[0], w[1]);
            times.push(a);
            for j in 1..factor {
                times.push(a + (b - a) * j as f64 / factor as f64);
            }
        }
        times.push(self.horizon());
        let meas_index = self.meas_index.iter().map(|&i| i * factor).collect();
        let grid = TimeGrid { times, meas_index, bound: self.bound };
        grid.check_bound()?;
        Ok(grid)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of points, `N + 1`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of segments `N`.
    pub fn segments(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Length of segment `k`, `t_{k+1} - t_k`.
    pub fn step(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    /// Largest gap between consecutive points.
    pub fn mesh(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn meas_index(&self) -> &[usize] {
        &self.meas_index
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Index of the grid point closest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        nearest_index(&self.times, t)
    }

    /// True when every point of `coarse` is (up to rounding) a point of `self`.
    pub fn contains_grid(&self, coarse: &TimeGrid) -> bool {
        let tol = SNAP_TOL * self.horizon().max(1.0);
        coarse
            .times
            .iter()
            .all(|&t| (self.times[self.index_of(t)] - t).abs() <= tol)
    }

    /// Segment `k` such that `t_k <= t <= t_{k+1}`; clamps outside the horizon.
    pub fn segment_of(&self, t: f64) -> usize {
        let pos = self.times.partition_point(|&s| s <= t);
        pos.saturating_sub(1).min(self.segments() - 1)
    }
}

fn nearest_index(times: &[f64], t: f64) -> usize {
    let pos = times.partition_point(|&s| s < t);
    if pos == 0 {
        0
    } else if pos == times.len() {
        times.len() - 1
    } else if (times[pos] - t).abs() < (t - times[pos - 1]).abs() {
        pos
    } else {
        pos - 1
    }
}
