use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sdemap_cli::config::ExperimentConfig;
use sdemap_cli::experiments::{run_benes_convergence, run_simulate, run_vdp_robust, thread_pool};
use sdemap_cli::gradcheck::{gradient_suite, standard_subjects};
use sdemap_cli::output::{fmt_f64, write_atomic};
use sdemap_cli::validate::run_validate;
use sdemap_cli::CliError;

const AFTER_HELP: &str = "\
Output files (floating-point values carry 17 significant digits):
  benes-convergence  paths_{kind}_{N}.csv       t,x
                     convergence.csv            kind,N,sup_distance,merit,status,iterations,grad_norm,
                                                cold_start_merit,cold_start_distance
                     comparison.csv             kind_a,kind_b,sup_distance
  vdp-robust         ise.csv                    replicate,kind,ise,status,iterations
                     timings.csv                replicate,kind,runtime_s
                     data.csv                   replicate,t,y,outlier_flag
                     truth_0.csv, estimate_{kind}_0.csv   t,x1,x2
                     summary.json               per-kind median, p05, p95, count, failures
  simulate           path.csv                   t,x1,...,xn
                     measurements.csv           t,y,outlier_flag
  gradcheck          gradcheck.csv              subject,cases,max_rel_error,passed

Exit codes: 0 success, 1 validation failure, 2 usage or config error, 3 runtime failure.";

#[derive(Debug, Parser)]
#[command(name = "sdemap", version, about = "MAP and minimum-energy state-path estimation for SDE models", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config; defaults are used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory, overriding the config (default `results`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; affects scheduling only, never results.
    #[arg(long, global = true, value_name = "K", default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Beneš SDE: compare the merit kinds on nested grids.
    BenesConvergence,
    /// Van der Pol oscillator with outliers: Monte Carlo ISE study.
    VdpRobust,
    /// Run the self-checks; exits with 1 if any fails.
    Validate,
    /// Simulate one path and its measurements.
    Simulate,
    /// Finite-difference check of the analytic gradients.
    Gradcheck,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    let pool = thread_pool(cli.threads)?;

    match cli.command {
        Command::BenesConvergence => {
            let outcome = run_benes_convergence(&cfg, &out, &pool)?;
            for s in &outcome.studies {
                match &s.study {
                    Ok(study) => println!("{}: finest merit {}", s.kind, fmt_f64(study.finest().merit)),
                    Err(e) => println!("{}: failed: {e}", s.kind),
                }
            }
        }
        Command::VdpRobust => {
            let outcome = run_vdp_robust(&cfg, &out, &pool)?;
            for (kind, s) in &outcome.summary.kinds {
                println!(
                    "{kind}: median ISE {:?}, p05 {:?}, p95 {:?}, {} failures",
                    s.median, s.p05, s.p95, s.failures
                );
            }
            println!("outlier fraction {:.4}", outcome.outlier_fraction());
        }
        Command::Validate => {
            let summary = run_validate(&standard_subjects(), cfg.seed);
            for c in &summary.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if !summary.passed() {
                return Err(CliError::Validation(summary.failed_names().join(", ")));
            }
        }
        Command::Simulate => {
            let outcome = run_simulate(&cfg, &out)?;
            println!(
                "{} states, {} measurements ({} outliers)",
                outcome.path.grid().len(),
                outcome.measurements.len(),
                outcome.measurements.outlier_count()
            );
        }
        Command::Gradcheck => {
            let g = &cfg.gradcheck;
            let reports = gradient_suite(&standard_subjects(), g.cases, g.max_segments, g.tolerance, cfg.seed);
            write_atomic(&out.join("gradcheck.csv"), |w| {
                writeln!(w, "subject,cases,max_rel_error,passed")?;
                for r in &reports {
                    writeln!(w, "{},{},{},{}", r.name, r.cases, fmt_f64(r.max_rel_error), r.passed)?;
                }
                Ok(())
            })?;
            for r in &reports {
                let status = if r.passed { "PASS" } else { "FAIL" };
                println!("{status} {}: max rel err {:.2e}", r.name, r.max_rel_error);
                if let Some(e) = &r.error {
                    println!("  {e}");
                }
            }
            if reports.iter().any(|r| !r.passed) {
                let names: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
                return Err(CliError::Validation(names.join(", ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
