//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fail.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use sdemap::functionals::{
    curve_energy, curve_om, curve_posterior_terms, euler_merit, trapezoidal_merit, DiscreteMerit, FnCurve,
    QuadratureRule,
};
use sdemap::model::{builtin_model, DiscretePath, ModelName, ModelParams, TimeGrid};
use sdemap::oracle::{benes_em_samples, benes_normalization, benes_transition_cdf, ks_distance};
use sdemap::simulate::{strong_error_study, IncrementSource, ReferenceScheme, RngStream, WienerSource};
use sdemap_cli::config::ExperimentConfig;
use sdemap_cli::experiments::benes_problem;
use sdemap_cli::gradcheck::{gradient_suite, standard_subjects};
use sdemap_cli::validate::ou_oracle_distance;

const SEED: u64 = 20_240_601;

type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn sdemap(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sdemap"))
        .args(args)
        .output()
        .map_err(|e| format!("cannot run sdemap: {e}"))?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("sdemap {args:?} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)))
    }
}

fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).unwrap_or_default();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap_or("").split(',').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn num(row: &BTreeMap<String, String>, key: &str) -> Option<f64> {
    row.get(key).and_then(|v| v.parse().ok())
}

fn gradient_suite_criterion() -> Outcome {
    let start = Instant::now();
    let reports = gradient_suite(&standard_subjects(), 100, 50, 1e-6, SEED);
    let elapsed = start.elapsed();
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    outcome(
        failed.is_empty() && within(elapsed, 30),
        format!("max rel err {worst:.2e}, failed {failed:?}, {elapsed:.1?}"),
    )
}

fn ou_oracle_criterion() -> Outcome {
    let start = Instant::now();
    let trap = ou_oracle_distance(&DiscreteMerit::Trapezoidal, 256);
    let euler = ou_oracle_distance(&DiscreteMerit::Euler, 256);
    let elapsed = start.elapsed();
    match (trap, euler) {
        (Ok(t), Ok(e)) => outcome(
            t <= 1e-3 && e <= 5e-3 && within(elapsed, 10),
            format!("trapezoidal {t:.2e} (≤ 1e-3), euler {e:.2e} (≤ 5e-3), {elapsed:.1?}"),
        ),
        (t, e) => outcome(false, format!("trapezoidal {t:?}, euler {e:?}")),
    }
}

fn benes_criterion(dir: &Path) -> Outcome {
    let start = Instant::now();
    if let Err(e) = sdemap(&["--seed", &SEED.to_string(), "--out", dir.to_str().unwrap(), "benes-convergence"]) {
        return outcome(false, e);
    }
    let elapsed = start.elapsed();
    let pairs: BTreeMap<(String, String), f64> = read_csv(&dir.join("comparison.csv"))
        .iter()
        .filter_map(|r| Some(((r.get("kind_a")?.clone(), r.get("kind_b")?.clone()), num(r, "sup_distance")?)))
        .collect();
    let trap_exact = pairs.get(&("trapezoidal".into(), "exact".into())).copied().unwrap_or(f64::NAN);
    let euler_trap = pairs.get(&("euler".into(), "trapezoidal".into())).copied().unwrap_or(f64::NAN);
    let euler: Vec<f64> = read_csv(&dir.join("convergence.csv"))
        .iter()
        .filter(|r| r.get("kind").map(String::as_str) == Some("euler"))
        .filter_map(|r| num(r, "sup_distance"))
        .collect();
    let tail = &euler[euler.len().saturating_sub(3)..];
    let decreasing = tail.len() == 3 && tail.windows(2).all(|w| w[1] < w[0]);
    outcome(
        trap_exact <= 0.01 && euler_trap >= 0.05 && decreasing && within(elapsed, 120),
        format!(
            "trapezoidal-exact {trap_exact:.2e} (≤ 0.01), euler-trapezoidal {euler_trap:.3} (≥ 0.05), \
             euler distances {} decreasing {decreasing}, {elapsed:.1?}",
            sci(tail)
        ),
    )
}

fn hypo_convergence_criterion() -> Outcome {
    let start = Instant::now();
    let problem = match benes_problem(&ExperimentConfig::default()) {
        Ok(p) => p,
        Err(e) => return outcome(false, e.to_string()),
    };
    let curve = FnCurve { dim: 1, value: |t: f64| vec![t.sin()], derivative: |t: f64| vec![t.cos()] };
    let rule = QuadratureRule::seven_point();
    let breaks = TimeGrid::uniform(5.0, 256, &[]).expect("valid grid");
    let post = curve_posterior_terms(&curve, &problem).to_f64();
    let drift = problem.drift.as_ref();
    let h_e = curve_energy(&curve, &breaks, drift, &problem.diffusion, &rule) + post;
    let h = curve_om(&curve, &breaks, drift, &problem.diffusion, &rule) + post;

    let levels = [64, 128, 256, 512, 1024];
    let mut s_err = Vec::new();
    let mut v_err = Vec::new();
    for n in levels {
        let grid = Arc::new(TimeGrid::uniform(5.0, n, &[5.0]).expect("valid grid"));
        let path = DiscretePath::from_fn(grid, 1, |t| vec![t.sin()]);
        let s = euler_merit(&path, &problem).map(|m| m.value().to_f64()).unwrap_or(f64::NAN);
        let v = trapezoidal_merit(&path, &problem).map(|m| m.value().to_f64()).unwrap_or(f64::NAN);
        s_err.push((s - h_e).abs());
        v_err.push((v - h).abs());
    }
    let elapsed = start.elapsed();
    let tail_decreasing = |e: &[f64]| e[e.len() - 4..].windows(2).all(|w| w[1] < w[0]);
    let (s_last, v_last) = (s_err[levels.len() - 1], v_err[levels.len() - 1]);
    outcome(
        s_last <= 1e-3 && v_last <= 1e-3 && tail_decreasing(&s_err) && tail_decreasing(&v_err) && within(elapsed, 10),
        format!(
            "|S - H_e| {}, |V - H| {} over N = {levels:?} (≤ 1e-3 at N = 1024), {elapsed:.1?}",
            sci(&s_err),
            sci(&v_err)
        ),
    )
}

fn benes_density_criterion() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for from in [-1.0, 0.0, 1.5] {
        for delta in [0.25, 1.0, 2.0] {
            worst = worst.max((benes_normalization(from, delta, 15.0, 30_001) - 1.0).abs());
        }
    }
    let mut samples = benes_em_samples(0.0, 1.0, 1e-4, 100_000, SEED);
    let ks = ks_distance(&mut samples, |x| benes_transition_cdf(0.0, 1.0, x));
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-4 && ks <= 0.01 && within(elapsed, 60),
        format!("max |∫p - 1| {worst:.2e} (≤ 1e-4), KS {ks:.4} (≤ 0.01), {elapsed:.1?}"),
    )
}

fn vdp_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("vdp.json");
    let body = r#"{
  "schema_version": 1,
  "vdp_robust": {
    "replicates": 50,
    "horizon": 16.0,
    "estimation_step": 0.01,
    "measurement": { "step": 0.1, "sigma_y": 0.5, "sigma_o": 3.0, "p_o": 0.25, "component": 0 }
  }
}"#;
    fs::write(&path, body).expect("write config");
    path
}

fn vdp_criterion(dir: &Path, config: &Path) -> Outcome {
    let start = Instant::now();
    let run = sdemap(&[
        "--config",
        config.to_str().unwrap(),
        "--seed",
        &SEED.to_string(),
        "--out",
        dir.to_str().unwrap(),
        "vdp-robust",
    ]);
    if let Err(e) = run {
        return outcome(false, e);
    }
    let elapsed = start.elapsed();
    let mut ise: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut missing = 0;
    for r in read_csv(&dir.join("ise.csv")) {
        match num(&r, "ise") {
            Some(v) => ise.entry(r["kind"].clone()).or_default().push(v),
            None => missing += 1,
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let m = v.len();
        if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        }
    };
    let counts: Vec<usize> = ise.values().map(Vec::len).collect();
    let complete = missing == 0 && ise.len() == 2 && counts.iter().all(|&c| c == 50);
    let me = ise.get_mut("euler").map(&median).unwrap_or(f64::NAN);
    let mt = ise.get_mut("trapezoidal").map(median).unwrap_or(f64::NAN);
    let ratio = (me - mt).abs() / me.min(mt);

    let data = read_csv(&dir.join("data.csv"));
    let outliers = data.iter().filter(|r| r.get("outlier_flag").map(String::as_str) == Some("1")).count();
    let fraction = outliers as f64 / data.len().max(1) as f64;
    outcome(
        complete && ratio <= 0.25 && (fraction - 0.25).abs() <= 0.02 && within(elapsed, 900),
        format!(
            "complete {complete} ({missing} failed), median euler {me:.3} trapezoidal {mt:.3} \
             (rel diff {ratio:.3} ≤ 0.25), outlier fraction {fraction:.4}, {elapsed:.1?}"
        ),
    )
}

fn order_15_criterion() -> Outcome {
    let start = Instant::now();
    let h = 0.01;
    let mut src = WienerSource::new(RngStream::new(SEED, 0).rng());
    let (mut dw, mut dz) = ([0.0], [0.0]);
    let m = 200_000;
    let (mut ww, mut wz, mut zz) = (0.0, 0.0, 0.0);
    for _ in 0..m {
        src.wiener_pair(h, &mut dw, &mut dz);
        ww += dw[0] * dw[0];
        wz += dw[0] * dz[0];
        zz += dz[0] * dz[0];
    }
    let m = m as f64;
    let rel = [ww / m / h - 1.0, wz / m / (0.5 * h * h) - 1.0, zz / m / (h * h * h / 3.0) - 1.0];
    let moments_ok = rel.iter().all(|r| r.abs() <= 0.03);

    let ou = builtin_model(ModelName::OrnsteinUhlenbeck, &ModelParams::default()).expect("default OU");
    let study = strong_error_study(
        ou.drift.as_ref(),
        &ou.diffusion,
        &[1.0],
        1.0,
        &[1e-2, 5e-3, 2.5e-3],
        16,
        ReferenceScheme::Order15,
        500,
        SEED,
    );
    let elapsed = start.elapsed();
    match study {
        Ok(s) => {
            let errs: Vec<f64> = s.points.iter().map(|p| p.rms_error).collect();
            outcome(
                (s.slope - 1.5).abs() <= 0.3 && moments_ok && within(elapsed, 120),
                format!(
                    "slope {:.3} (1.5 ± 0.3), rms {}, moment rel errors {rel:.4?} (≤ 0.03), {elapsed:.1?}",
                    s.slope,
                    sci(&errs)
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .map(|it| {
            it.filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .filter(|p| p.file_name().is_some_and(|n| n != "timings.csv"))
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
                .collect()
        })
        .unwrap_or_default()
}

fn determinism_criterion(root: &Path, benes_ref: &Path, vdp_ref: &Path, vdp_config: &Path) -> Outcome {
    let benes = root.join("benes_threads");
    let vdp = root.join("vdp_threads");
    let seed = SEED.to_string();
    let runs = sdemap(&["--seed", &seed, "--threads", "4", "--out", benes.to_str().unwrap(), "benes-convergence"])
        .and_then(|_| {
            sdemap(&[
                "--config",
                vdp_config.to_str().unwrap(),
                "--seed",
                &seed,
                "--threads",
                "3",
                "--out",
                vdp.to_str().unwrap(),
                "vdp-robust",
            ])
        });
    if let Err(e) = runs {
        return outcome(false, e);
    }
    let mut differing = Vec::new();
    let mut compared = 0;
    for (a, b) in [(benes_ref, &benes), (vdp_ref, &vdp)] {
        let (fa, fb) = (csv_files(a), csv_files(b));
        if fa.keys().ne(fb.keys()) {
            differing.push(format!("{}: file sets differ", b.display()));
        }
        for (name, bytes) in &fa {
            compared += 1;
            if fb.get(name) != Some(bytes) {
                differing.push(name.clone());
            }
        }
    }
    outcome(
        differing.is_empty() && compared > 0,
        format!("{compared} CSVs compared across --threads 1/3/4, differing {differing:?}"),
    )
}

fn main() {
    let root = tempfile::tempdir().expect("temporary directory");
    let benes_dir = root.path().join("benes");
    let vdp_dir = root.path().join("vdp");
    let config = vdp_config(root.path());

    let criteria: Vec<Criterion> = vec![
        ("1 gradient suite", Box::new(gradient_suite_criterion)),
        ("2 linear-gaussian oracle", Box::new(ou_oracle_criterion)),
        ("3 benes map estimators", Box::new(|| benes_criterion(&benes_dir))),
        ("4 merit hypo-convergence", Box::new(hypo_convergence_criterion)),
        ("5 benes exact density", Box::new(benes_density_criterion)),
        ("6 van der pol study", Box::new(|| vdp_criterion(&vdp_dir, &config))),
        ("7 order-1.5 integrator", Box::new(order_15_criterion)),
        ("8 determinism", Box::new(|| determinism_criterion(root.path(), &benes_dir, &vdp_dir, &config))),
    ];

    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        if !o.passed {
            failed += 1;
        }
        println!("{tag} criterion {name}: {}", o.detail);
    }
    println!("acceptance: {} failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
