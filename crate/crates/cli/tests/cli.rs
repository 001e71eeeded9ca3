use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sdemap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdemap")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).expect("column present");
    lines.map(|l| l.split(',').nth(idx).unwrap_or("").to_string()).collect()
}

fn trapezoid_sq(path: &Path) -> f64 {
    let text = fs::read_to_string(path).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    rows.windows(2)
        .map(|w| {
            let sq = |r: &[f64]| r[1..].iter().map(|x| x * x).sum::<f64>();
            0.5 * (w[1][0] - w[0][0]) * (sq(&w[0]) + sq(&w[1]))
        })
        .sum()
}

#[test]
fn help_exits_zero_and_documents_columns() {
    let out = sdemap(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("convergence.csv") && text.contains("Exit codes"));
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = sdemap(&["--config", "/nonexistent/config.json", "validate"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(code(&sdemap(&["frobnicate"])), 2);
}

#[test]
fn bad_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        r#"{"seed": 1}"#,
        r#"{"schema_version": 1, "bogus": true}"#,
        r#"{"schema_version": 1, "vdp_robust": {"replicates": 2, "extra": 1}}"#,
        r#"{"schema_version": 1, "benes_convergence": {"levels": []}}"#,
        "not json",
    ] {
        let cfg = write_config(dir.path(), body);
        let out = sdemap(&["--config", &cfg, "--out", dir.path().join("o").to_str().unwrap(), "benes-convergence"]);
        assert_eq!(code(&out), 2, "{body}");
        assert!(!dir.path().join("o").join("convergence.csv").exists());
    }
}

#[test]
fn validate_passes_on_a_clean_build() {
    let out = sdemap(&["validate"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn single_level_has_empty_distance_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema_version": 1, "benes_convergence": {"levels": [4]}}"#);
    let out_dir = dir.path().join("out");
    let out = sdemap(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "benes-convergence"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let conv = out_dir.join("convergence.csv");
    assert_eq!(column(&conv, "N"), vec!["4", "4", "4"]);
    assert!(column(&conv, "sup_distance").iter().all(String::is_empty));
    for kind in ["euler", "trapezoidal", "exact"] {
        assert_eq!(fs::read_to_string(out_dir.join(format!("paths_{kind}_4.csv"))).unwrap().lines().count(), 6);
    }
}

#[test]
fn single_replicate_is_bitwise_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema_version": 1, "vdp_robust": {"replicates": 1, "horizon": 4.0}}"#,
    );
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = sdemap(&["--config", &cfg, "--seed", "7", "--out", out_dir.to_str().unwrap(), "vdp-robust"]);
        assert_eq!(code(&out), 0);
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["ise.csv", "data.csv", "truth_0.csv", "estimate_euler_0.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn noiseless_data_beats_the_zero_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema_version": 1, "vdp_robust": {"replicates": 2, "horizon": 4.0, "estimation_step": 0.005,
            "likelihood_sigma": 0.001,
            "measurement": {"step": 0.1, "sigma_y": 0.001, "sigma_o": 3.0, "p_o": 0.0, "component": 0}}}"#,
    );
    let out_dir = dir.path().join("out");
    let out = sdemap(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "vdp-robust"]);
    assert_eq!(code(&out), 0);
    let zero = trapezoid_sq(&out_dir.join("truth_0.csv"));
    let ise = column(&out_dir.join("ise.csv"), "ise");
    let kinds = column(&out_dir.join("ise.csv"), "kind");
    assert_eq!(ise.len(), 4);
    for (v, kind) in ise.iter().zip(&kinds) {
        let v: f64 = v.parse().unwrap();
        assert!(v <= 0.05, "{kind}: {v}");
        assert!(v < zero, "{kind}: {v} vs {zero}");
    }
}

#[test]
fn simulate_writes_path_and_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema_version": 1, "simulate": {"horizon": 2.0}}"#);
    let out_dir = dir.path().join("out");
    assert_eq!(code(&sdemap(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "simulate"])), 0);
    let path = fs::read_to_string(out_dir.join("path.csv")).unwrap();
    assert!(path.starts_with("t,x1,x2\n"));
    assert_eq!(path.lines().count(), 1 + 4001);
    assert_eq!(fs::read_to_string(out_dir.join("measurements.csv")).unwrap().lines().count(), 1 + 21);
}

#[test]
fn gradcheck_reports_every_subject() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema_version": 1, "gradcheck": {"cases": 10}}"#);
    let out_dir = dir.path().join("out");
    assert_eq!(code(&sdemap(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "gradcheck"])), 0);
    let passed = column(&out_dir.join("gradcheck.csv"), "passed");
    assert_eq!(passed.len(), 5);
    assert!(passed.iter().all(|p| p == "true"));
}
