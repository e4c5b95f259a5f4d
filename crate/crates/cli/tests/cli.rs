use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cocyclelab"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const DIAGONAL: &str = r#"
[cocycle]
[[cocycle.generators]]
kind = "constant"
matrix = { rows = [[2.0, 0.0], [0.0, 0.5]] }
"#;

#[test]
fn passing_run_exits_zero_and_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = run(&["spectrum", "--n-iter", "2000", "--n-samples", "4"], &configs().join("diagonal.toml"), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("PASS expected_spectrum"));
    for f in ["report.json", "timing.json", "convergence.csv", "per_sample.csv", "oracle.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["all_pass"], true);
    assert_eq!(report["config"]["experiment"]["n_iter"], 2000);
}

#[test]
fn json_format_writes_series_as_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = run(&["bunching", "--format", "json"], &configs().join("bunching.toml"), &out);
    assert_eq!(o.status.code(), Some(0));
    let sweep: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(sweep["columns"][0], "s");
    assert!(!out.join("sweep.csv").exists());
}

#[test]
fn failed_verdict_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "wrong.toml",
        &format!("{DIAGONAL}\n[experiment]\nexpected = [0.5, -0.5]\n"),
    );
    let o = run(&["spectrum", "--n-iter", "2000", "--n-samples", "4"], &cfg, &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stdout).unwrap().contains("FAIL expected_spectrum"));
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    for (name, text, sub) in [
        ("unknown.toml", "[experiment]\nflavour = 1\n", "spectrum"),
        ("negative.toml", "[experiment]\ntol = -0.1\n", "spectrum"),
        ("name.toml", "[experiment]\nname = \"bunching\"\n", "spectrum"),
        ("broken.toml", "[experiment\n", "spectrum"),
    ] {
        let cfg = write(tmp.path(), name, text);
        let o = run(&[sub], &cfg, &out);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run(&["spectrum", "--tol", "0"], &configs().join("diagonal.toml"), &out);
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["spectrum", "--config", "/nonexistent/cfg.toml"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn precondition_failure_exits_two() {
    // a bump wider than the orbit separation at the homoclinic point
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "wide.toml",
        "[experiment]\nleaf_period = 6\nbump_radius = 0.5\nn_samples = 4\nn_iter = 500\ndefect_pairs = 10\n",
    );
    let o = run(&["su-breaking"], &cfg, &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8(o.stderr).unwrap().is_empty());
}

#[test]
fn seed_flag_changes_sampling() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("rotation.toml");
    let mut reports = Vec::new();
    for seed in ["1", "2"] {
        let out = tmp.path().join(seed);
        let o = run(&["spectrum", "--seed", seed, "--n-iter", "500", "--n-samples", "4"], &cfg, &out);
        assert_ne!(o.status.code(), Some(2));
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
        assert_eq!(v["seed"].as_u64().unwrap().to_string(), seed);
        reports.push(v["records"]["spectrum"]["exponents"].clone());
    }
    assert_ne!(reports[0], reports[1]);
}
