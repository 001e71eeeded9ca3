use nalgebra::{DMatrix, DVector};

use crate::functionals::MeritKind;
use crate::model::{Diffusion, Problem, TimeGrid};

/// Approximate inverse Hessian of the negated merit, used as the initial
/// matrix of the quasi-Newton recursion.
pub trait Preconditioner {
    fn apply(&self, v: &[f64]) -> Vec<f64>;

    /// Rebuilds the approximation at `x`. Returns `true` if it changed, in
    /// which case the optimizer discards its curvature memory.
    fn refresh(&mut self, _x: &[f64]) -> bool {
        false
    }
}

/// Block LDLᵀ factorization of a symmetric positive definite
/// block-tridiagonal matrix with diagonal blocks `D_k` and upper blocks
/// `C_k` (between `k` and `k + 1`).
#[derive(Debug, Clone)]
struct BlockTridiagonal {
    dim: usize,
    /// `S_k⁻¹` with `S_k = D_k - C_{k-1}ᵀ S_{k-1}⁻¹ C_{k-1}`.
    pivots_inv: Vec<DMatrix<f64>>,
    upper: Vec<DMatrix<f64>>,
}

impl BlockTridiagonal {
    fn factor(diag: Vec<DMatrix<f64>>, upper: Vec<DMatrix<f64>>) -> Option<Self> {
        let dim = diag[0].nrows();
        let mut pivots_inv: Vec<DMatrix<f64>> = Vec::with_capacity(diag.len());
        for (k, d) in diag.into_iter().enumerate() {
            let mut pivot = d;
            if k > 0 {
                let c = &upper[k - 1];
                pivot -= c.transpose() * &pivots_inv[k - 1] * c;
            }
            pivot = (&pivot + pivot.transpose()) * 0.5;
            pivots_inv.push(pivot.cholesky()?.inverse());
        }
        Some(BlockTridiagonal { dim, pivots_inv, upper })
    }

    fn solve(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let points = self.pivots_inv.len();
        let block = |k: usize| DVector::from_column_slice(&v[k * n..(k + 1) * n]);
        let mut z: Vec<DVector<f64>> = Vec::with_capacity(points);
        z.push(block(0));
        for k in 1..points {
            let prev = self.upper[k - 1].tr_mul(&(&self.pivots_inv[k - 1] * &z[k - 1]));
            z.push(block(k) - prev);
        }
        let mut out = vec![0.0; v.len()];
        let mut next: DVector<f64> = &self.pivots_inv[points - 1] * &z[points - 1];
        out[(points - 1) * n..].copy_from_slice(next.as_slice());
        for k in (0..points - 1).rev() {
            let xk = &self.pivots_inv[k] * (&z[k] - &self.upper[k] * &next);
            out[k * n..(k + 1) * n].copy_from_slice(xk.as_slice());
            next = xk;
        }
        out
    }
}

/// Inverse of the block-tridiagonal Hessian of the pure Brownian energy
/// `½ Σ_k ‖Δx_k‖²_Q / δ_k`, anchored at `x_0` by `Q / T` so that it is
/// positive definite.
///
/// The merits are dominated by this term on fine grids, where its condition
/// number grows like `N²`; applying its inverse makes the iteration count
/// roughly independent of the grid size.
#[derive(Debug, Clone)]
pub struct PathPreconditioner {
    factor: BlockTridiagonal,
}

impl PathPreconditioner {
    pub fn new(grid: &TimeGrid, diffusion: &Diffusion) -> Self {
        let q = diffusion.q();
        let points = grid.len();
        let mut diag = vec![q / grid.horizon()];
        diag.extend((1..points).map(|_| DMatrix::zeros(q.nrows(), q.ncols())));
        let mut upper = Vec::with_capacity(grid.segments());
        for k in 0..grid.segments() {
            let w = 1.0 / grid.step(k);
            diag[k] += q * w;
            diag[k + 1] += q * w;
            upper.push(q * (-w));
        }
        let factor = BlockTridiagonal::factor(diag, upper).expect("anchored Brownian Hessian is positive definite");
        PathPreconditioner { factor }
    }
}

impl Preconditioner for PathPreconditioner {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.factor.solve(v)
    }
}

/// Inverse of a Gauss–Newton approximation of the negated merit's Hessian
/// at a given path: the energy residuals
/// `e_k = x_{k+1} - x_k - δ_k φ_k` (with `φ_k = f(x_k)` for the Euler and
/// exact kinds and `(f(x_k) + f(x_{k+1}))/2` for the trapezoidal kinds)
/// linearized in the states, plus the curvatures reported by the prior and
/// the likelihoods, plus the `Q / T` anchor at `x_0`. Volume and divergence
/// terms are left out.
///
/// Unlike [`PathPreconditioner`] it accounts for the drift Jacobian and the
/// measurement weights, which dominate the conditioning when the diffusion
/// is small. [`Preconditioner::refresh`] relinearizes at the current path.
pub struct GaussNewtonPreconditioner<'a> {
    problem: &'a Problem,
    grid: &'a TimeGrid,
    trapezoidal: bool,
    factor: BlockTridiagonal,
}

impl<'a> GaussNewtonPreconditioner<'a> {
    /// `None` if the approximation is not numerically positive definite.
    pub fn new(problem: &'a Problem, kind: MeritKind, grid: &'a TimeGrid, states: &[f64]) -> Option<Self> {
        let trapezoidal = matches!(kind, MeritKind::Trapezoidal | MeritKind::TrapezoidalEnergy);
        let factor = Self::assemble(problem, grid, trapezoidal, states)?;
        Some(GaussNewtonPreconditioner { problem, grid, trapezoidal, factor })
    }

    fn assemble(problem: &Problem, grid: &TimeGrid, trapezoidal: bool, states: &[f64]) -> Option<BlockTridiagonal> {
        let n = problem.dim();
        let q = problem.diffusion.q();
        let times = grid.times();
        let x = |k: usize| &states[k * n..(k + 1) * n];
        let eye = DMatrix::<f64>::identity(n, n);
        let jac: Vec<DMatrix<f64>> = (0..grid.len()).map(|k| problem.drift.jacobian(times[k], x(k))).collect();

        let mut diag = vec![q / grid.horizon() + problem.initial.curvature(x(0))];
        diag.extend((1..grid.len()).map(|_| DMatrix::zeros(n, n)));
        let mut upper = Vec::with_capacity(grid.segments());
        for k in 0..grid.segments() {
            let d = grid.step(k);
            let (a, b) = if trapezoidal {
                (-(&eye + &jac[k] * (0.5 * d)), &eye - &jac[k + 1] * (0.5 * d))
            } else {
                (-(&eye + &jac[k] * d), eye.clone())
            };
            let qa = q * &a / d;
            let qb = q * &b / d;
            diag[k] += a.tr_mul(&qa);
            diag[k + 1] += b.tr_mul(&qb);
            upper.push(a.tr_mul(&qb));
        }
        for r in problem.measurements.records() {
            let k = grid.index_of(r.time);
            diag[k] += r.likelihood.curvature(&r.value, x(k));
        }
        BlockTridiagonal::factor(diag, upper)
    }
}

impl Preconditioner for GaussNewtonPreconditioner<'_> {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.factor.solve(v)
    }

    fn refresh(&mut self, x: &[f64]) -> bool {
        match Self::assemble(self.problem, self.grid, self.trapezoidal, x) {
            Some(f) => {
                self.factor = f;
                true
            }
            None => false,
        }
    }
}
