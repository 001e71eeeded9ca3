use std::sync::Arc;

use super::{ModelError, TimeGrid};

/// States `x_0, ..., x_N` on a [`TimeGrid`], read everywhere as the
/// piecewise-linear interpolant with breaks on the grid.
///
/// States are stored row-major: `states[k * dim + i]` is component `i` at
/// grid point `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    grid: Arc<TimeGrid>,
    dim: usize,
    states: Vec<f64>,
}

impl DiscretePath {
    pub fn new(grid: Arc<TimeGrid>, dim: usize, states: Vec<f64>) -> Result<Self, ModelError> {
        if dim == 0 || states.len() != grid.len() * dim {
            return Err(ModelError::DimensionMismatch {
                expected: grid.len() * dim,
                found: states.len(),
            });
        }
        Ok(DiscretePath { grid, dim, states })
    }

    pub fn zeros(grid: Arc<TimeGrid>, dim: usize) -> Self {
        let states = vec![0.0; grid.len() * dim];
        DiscretePath { grid, dim, states }
    }

    /// Samples `f(t)` at every grid point.
    pub fn from_fn(grid: Arc<TimeGrid>, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Self {
        let mut states = Vec::with_capacity(grid.len() * dim);
        for &t in grid.times() {
            let x = f(t);
            assert_eq!(x.len(), dim, "state function returned wrong dimension");
            states.extend_from_slice(&x);
        }
        DiscretePath { grid, dim, states }
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [f64] {
        &mut self.states
    }

    pub fn into_states(self) -> Vec<f64> {
        self.states
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    /// Same grid, new states.
    pub fn with_states(&self, states: Vec<f64>) -> Result<Self, ModelError> {
        DiscretePath::new(self.grid.clone(), self.dim, states)
    }

    /// Value of the piecewise-linear interpolant at `t` (clamped to `[0, T]`).
    pub fn at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.at_into(t, &mut out);
        out
    }

    pub fn at_into(&self, t: f64, out: &mut [f64]) {
        let times = self.grid.times();
        let t = t.clamp(0.0, self.grid.horizon());
        let k = self.grid.segment_of(t);
        let s = (t - times[k]) / (times[k + 1] - times[k]);
        let (a, b) = (self.state(k), self.state(k + 1));
        for i in 0..self.dim {
            out[i] = a[i] + s * (b[i] - a[i]);
        }
    }

    /// Linear interpolation of this path onto another grid.
    pub fn resample(&self, grid: Arc<TimeGrid>) -> DiscretePath {
        let mut states = vec![0.0; grid.len() * self.dim];
        for (k, &t) in grid.times().iter().enumerate() {
            self.at_into(t, &mut states[k * self.dim..(k + 1) * self.dim]);
        }
        DiscretePath { grid, dim: self.dim, states }
    }

    /// Largest Euclidean distance between the two interpolants over the
    /// points of `on`.
    pub fn sup_distance(&self, other: &DiscretePath, on: &TimeGrid) -> f64 {
        let mut a = vec![0.0; self.dim];
        let mut b = vec![0.0; self.dim];
        on.times()
            .iter()
            .map(|&t| {
                self.at_into(t, &mut a);
                other.at_into(t, &mut b);
                a.iter()
                    .zip(&b)
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}
