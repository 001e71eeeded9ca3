use super::{
    euler_maruyama, strong_order_15, IncrementSource, ReplaySource, RngStream, SimulateError, WienerSource,
};
use crate::model::{Diffusion, Drift};

/// Scheme used for the fine reference solution of a strong-error study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceScheme {
    EulerMaruyama,
    Order15,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongErrorPoint {
    pub step: f64,
    /// Root-mean-square terminal error against the reference.
    pub rms_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongStudy {
    pub points: Vec<StrongErrorPoint>,
    /// Least-squares slope of `ln rms` against `ln h`.
    pub slope: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Coarsens `(ΔW, ΔZ)` increments of step `base` by `factor`:
/// `ΔW = Σ ΔW_i` and `ΔZ = Σ (ΔZ_i + base · (W_{i} - W_{start}))`.
pub(crate) fn aggregate(dim: usize, dw: &[f64], dz: &[f64], base: f64, factor: usize) -> (Vec<f64>, Vec<f64>) {
    let fine_steps = dw.len() / dim;
    let coarse_steps = fine_steps / factor;
    let mut cw = vec![0.0; coarse_steps * dim];
    let mut cz = vec![0.0; coarse_steps * dim];
    for c in 0..coarse_steps {
        for j in 0..dim {
            let mut w = 0.0;
            let mut z = 0.0;
            for i in c * factor..(c + 1) * factor {
                z += dz[i * dim + j] + base * w;
                w += dw[i * dim + j];
            }
            cw[c * dim + j] = w;
            cz[c * dim + j] = z;
        }
    }
    (cw, cz)
}

fn multiple_of(h: f64, base: f64) -> Result<usize, SimulateError> {
    let m = (h / base).round();
    if m < 1.0 || (m * base - h).abs() > 1e-9 * h {
        return Err(SimulateError::Invalid(format!("step {h} is not a multiple of the base step {base}")));
    }
    Ok(m as usize)
}

/// RMS terminal error of [`strong_order_15`] at each step in `steps`
/// against a reference `reference_ratio` times finer, all driven by the same
/// Brownian path per replicate (replicate `r` uses stream `r` of `seed`).
#[allow(clippy::too_many_arguments)]
pub fn strong_error_study(
    drift: &dyn Drift,
    diffusion: &Diffusion,
    x0: &[f64],
    horizon: f64,
    steps: &[f64],
    reference_ratio: usize,
    reference: ReferenceScheme,
    replicates: usize,
    seed: u64,
) -> Result<StrongStudy, SimulateError> {
    if steps.len() < 2 || reference_ratio < 1 || replicates == 0 {
        return Err(SimulateError::Invalid("need two steps, a positive ratio and replicates".into()));
    }
    let n = drift.dim();
    let h_min = steps.iter().copied().fold(f64::INFINITY, f64::min);
    let base = h_min / reference_ratio as f64;
    let fine_steps = multiple_of(horizon, base)?;
    let mut factors = Vec::with_capacity(steps.len());
    for &h in steps {
        let m = multiple_of(h, base)?;
        if m % reference_ratio != 0 || fine_steps % m != 0 {
            return Err(SimulateError::Invalid(format!("step {h} does not tile the base grid")));
        }
        factors.push(m);
    }

    let mut sq = vec![0.0; steps.len()];
    let mut dw = vec![0.0; fine_steps * n];
    let mut dz = vec![0.0; fine_steps * n];
    for r in 0..replicates {
        let mut source = WienerSource::new(RngStream::new(seed, r as u64).rng());
        for k in 0..fine_steps {
            source.wiener_pair(base, &mut dw[k * n..(k + 1) * n], &mut dz[k * n..(k + 1) * n]);
        }
        for (i, (&h, &m)) in steps.iter().zip(&factors).enumerate() {
            let (cw, cz) = aggregate(n, &dw, &dz, base, m);
            let coarse = strong_order_15(drift, diffusion, x0, h, horizon, &mut ReplaySource::new(n, cw, cz))?;
            let ref_factor = m / reference_ratio;
            let (rw, rz) = aggregate(n, &dw, &dz, base, ref_factor);
            let h_ref = h / reference_ratio as f64;
            let mut replay = ReplaySource::new(n, rw, rz);
            let fine = match reference {
                ReferenceScheme::EulerMaruyama => euler_maruyama(drift, diffusion, x0, h_ref, horizon, &mut replay)?,
                ReferenceScheme::Order15 => strong_order_15(drift, diffusion, x0, h_ref, horizon, &mut replay)?,
            };
            let last_c = coarse.state(coarse.grid().len() - 1);
            let last_f = fine.state(fine.grid().len() - 1);
            sq[i] += last_c.iter().zip(last_f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
    }
    let points: Vec<StrongErrorPoint> = steps
        .iter()
        .zip(&sq)
        .map(|(&step, &s)| StrongErrorPoint { step, rms_error: (s / replicates as f64).sqrt() })
        .collect();
    let hs: Vec<f64> = points.iter().map(|p| p.step).collect();
    let es: Vec<f64> = points.iter().map(|p| p.rms_error).collect();
    Ok(StrongStudy { slope: loglog_slope(&hs, &es), points })
}
