//! Experiment runners behind the `benes-convergence`, `vdp-robust` and
//! `simulate` subcommands.

mod benes;
mod simulate;
mod vdp;

use std::io::{self, Write};
use std::sync::Arc;

use rayon::{ThreadPool, ThreadPoolBuilder};
use sdemap::functionals::{DiscreteMerit, MeritKind};
use sdemap::model::DiscretePath;
use sdemap::oracle::BenesTransition;

pub use benes::{benes_problem, run_benes_convergence, BenesOutcome, KindStudy};
pub use simulate::{run_simulate, SimulateOutcome};
pub use vdp::{
    percentile, run_replicate, run_vdp_robust, summarize, summary_from_csv, IseRecord, KindSummary, ReplicateOutcome,
    VdpOutcome, VdpSummary,
};

use crate::output::fmt_f64;
use crate::{runtime, CliError};

/// Worker pool with `threads` workers (0 picks the rayon default).
pub fn thread_pool(threads: usize) -> Result<ThreadPool, CliError> {
    ThreadPoolBuilder::new().num_threads(threads).build().map_err(runtime)
}

/// Discrete merit of the given kind. The exact kind uses the Beneš
/// transition density and only applies to that model.
pub fn merit_for(kind: MeritKind) -> DiscreteMerit {
    match kind {
        MeritKind::Euler => DiscreteMerit::Euler,
        MeritKind::Trapezoidal => DiscreteMerit::Trapezoidal,
        MeritKind::TrapezoidalEnergy => DiscreteMerit::TrapezoidalEnergy,
        MeritKind::Exact => DiscreteMerit::Exact(Arc::new(BenesTransition)),
    }
}

/// Path CSV: header `t,x` for scalar paths, `t,x1,...,xn` otherwise.
pub fn write_path(w: &mut dyn Write, path: &DiscretePath) -> io::Result<()> {
    if path.dim() == 1 {
        writeln!(w, "t,x")?;
    } else {
        let cols: Vec<String> = (1..=path.dim()).map(|i| format!("x{i}")).collect();
        writeln!(w, "t,{}", cols.join(","))?;
    }
    for (k, &t) in path.grid().times().iter().enumerate() {
        write!(w, "{}", fmt_f64(t))?;
        for &v in path.state(k) {
            write!(w, ",{}", fmt_f64(v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}
