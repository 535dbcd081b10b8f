use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn nltv(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_nltv")).current_dir(dir).args(args).output().expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().expect("exit code"), text)
}

fn write(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn suite<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["suites"].as_array().unwrap().iter().find(|s| s["name"] == name).unwrap()
}

const SMALL_2D: &str = r#"
extent = 8.0
h = 1.0
trunc_radius = 3.0
trials = 3
[datum]
kind = "radial_holder"
beta = 0.75
center = [0.0, 0.0]
cap = 4.0
"#;

#[test]
fn constant_datum_is_returned_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", "dim = 1\nshape = [24]\nh = 0.1\n[datum]\nkind = \"constant\"\nvalue = 2.5\n");
    let (code, text) = nltv(dir.path(), &["denoise", "--config", "c.toml", "--out", "out"]);
    assert_eq!(code, 0, "{text}");
    let r = report(&dir.path().join("out/report.json"));
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["passed"], true);
    let u = fs::read_to_string(dir.path().join("out/u.csv")).unwrap();
    let values: Vec<f64> = u.split([',', '\n']).filter(|v| !v.trim().is_empty()).map(|v| v.trim().parse().unwrap()).collect();
    assert_eq!(values.len(), 24);
    assert!(values.iter().all(|&v| (v - 2.5).abs() < 1e-12));
    let z: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/z_summary.json")).unwrap()).unwrap();
    assert_eq!(z["pairs"]["plus_one"], 0);
}

#[test]
fn missing_datum_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", "[datum]\nfile = \"absent.csv\"\n");
    let (code, text) = nltv(dir.path(), &["denoise", "--config", "c.toml"]);
    assert_eq!(code, 2, "{text}");
    assert!(text.contains("absent.csv"));
}

#[test]
fn datum_file_is_read_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("cfg")).unwrap();
    write(&dir.path().join("cfg"), "f.csv", "0,10\n");
    write(&dir.path().join("cfg"), "c.toml", "dim = 1\nshape = [2]\nh = 1.0\ns = 0.5\ntrunc_radius = 2.0\nnear_field_rule = \"midpoint\"\n[datum]\nfile = \"f.csv\"\n");
    let (code, text) = nltv(dir.path(), &["denoise", "--config", "cfg/c.toml", "--out", "out"]);
    assert_eq!(code, 0, "{text}");
    let u = fs::read_to_string(dir.path().join("out/u.csv")).unwrap();
    let values: Vec<f64> = u.split([',', '\n']).filter(|v| !v.trim().is_empty()).map(|v| v.trim().parse().unwrap()).collect();
    assert!((values[0] - 1.0).abs() < 1e-8 && (values[1] - 9.0).abs() < 1e-8, "{values:?}");
}

#[test]
fn five_cell_denoise_matches_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.toml",
        "dim = 1\nshape = [5]\nh = 1.0\ntrunc_radius = 5.0\noracle = true\n[datum]\nkind = \"random\"\nseed = 7\namplitude = 3.0\n",
    );
    let (code, text) = nltv(dir.path(), &["denoise", "--config", "c.toml", "--out", "out", "--log-every", "1"]);
    assert_eq!(code, 0, "{text}");
    let r = report(&dir.path().join("out/report.json"));
    let oracle = suite(&r, "oracle");
    assert_eq!(oracle["passed"], true);
    assert!(oracle["checks"][0]["value"].as_f64().unwrap() <= 1e-8);
    let log = fs::read_to_string(dir.path().join("out/solver_log.jsonl")).unwrap();
    let first: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert!(first["gap"].is_number());
}

#[test]
fn non_convergence_exits_3_and_keeps_the_iterate() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", &format!("{SMALL_2D}\n[solver]\nmax_iters = 3\npolish = false\n"));
    let (code, text) = nltv(dir.path(), &["denoise", "--config", "c.toml", "--out", "out"]);
    assert_eq!(code, 3, "{text}");
    assert!(dir.path().join("out/u.csv").is_file());
    assert_eq!(report(&dir.path().join("out/report.json"))["solve"]["converged"], false);
}

#[test]
fn order_suite_passes_over_seeds() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", "dim = 1\nshape = [32]\nh = 0.05\ntrials = 10\n");
    for seed in 1..=3 {
        let (code, text) = nltv(dir.path(), &["verify", "--config", "c.toml", "--suite", "order", "--seed", &seed.to_string()]);
        assert_eq!(code, 0, "{text}");
    }
}

#[test]
fn identity_suites_pass() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL_2D);
    let (code, text) = nltv(dir.path(), &["verify", "--config", "c.toml", "--suite", "coarea", "--suite", "submodularity"]);
    assert_eq!(code, 0, "{text}");
    let r = report(&dir.path().join("nltv-out/report.json"));
    assert_eq!(r["suites"].as_array().unwrap().len(), 2);
}

#[test]
fn coarse_curvature_probe_is_reported_under_resolved() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", "h = 8.0\n");
    let (code, text) = nltv(dir.path(), &["verify", "--config", "c.toml", "--suite", "curvature"]);
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("under-resolved"));
}

#[test]
fn unknown_suite_and_bad_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(nltv(dir.path(), &["verify", "--suite", "nonsense"]).0, 2);
    assert_eq!(nltv(dir.path(), &["sweep", "--param", "gamma", "--values", "1,2"]).0, 2);
    assert_eq!(nltv(dir.path(), &["sweep", "--param", "s", "--values", "0.5"]).0, 2);
    assert_eq!(nltv(dir.path(), &["frobnicate"]).0, 2);
    assert_eq!(nltv(dir.path(), &["--help"]).0, 0);
    write(dir.path(), "bad.toml", "s = 1.5\n");
    assert_eq!(nltv(dir.path(), &["verify", "--config", "bad.toml"]).0, 2);
}

#[test]
fn s_sweep_brackets_the_interval_perimeter() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", "dim = 1\nextent = 1.0\nh = 0.015625\ntrunc_radius = 1.0\n[datum]\nkind = \"constant\"\nvalue = 0.0\n");
    let (code, text) = nltv(dir.path(), &["sweep", "--config", "c.toml", "--param", "s", "--values", "0.3,0.5,0.7", "--out", "sw"]);
    assert_eq!(code, 0, "{text}");
    let csv = fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let p: Vec<f64> = cols[7..11].iter().map(|c| c.parse().unwrap()).collect();
        assert!(p[1] <= p[3] && p[3] <= p[2], "{line}");
    }
    for k in 0..3 {
        assert!(dir.path().join(format!("sw/s_{k}/report.json")).is_file());
    }
    let r = report(&dir.path().join("sw/sweep_report.json"));
    assert_eq!(suite(&r, "trend")["passed"], true);
}

#[test]
fn repeated_runs_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL_2D);
    let mut seen = Vec::new();
    for _ in 0..2 {
        let (code, text) = nltv(dir.path(), &["verify", "--config", "c.toml", "--seed", "11"]);
        assert!(code == 0 || code == 1, "{text}");
        let mut r = report(&dir.path().join("nltv-out/report.json"));
        r.as_object_mut().unwrap().remove("timings");
        seen.push(serde_json::to_string(&r).unwrap());
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn library_entry_points_match_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = nltv_harness::RunConfig { out_dir: dir.path().join("o"), trials: 2, ..Default::default() };
    let out = nltv_harness::verify(&cfg, &[nltv_harness::Suite::Coarea]);
    assert_eq!(out.exit, nltv_harness::Exit::Pass);
    let r = out.report.unwrap();
    assert_eq!(r.suites.len(), 1);
    assert!(r.suites[0].checks.iter().all(|c| c.passed));
}
