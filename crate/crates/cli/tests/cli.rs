use std::path::Path;
use std::process::{Command, Output};

const GOLDEN_CFG: &str = include_str!("../configs/golden.cfg");

fn genfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genfl"))
        .args(args)
        .env_remove("GENFL_LOG")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_cfg(dir: &Path, extra: &str) -> String {
    let path = dir.join("run.cfg");
    let text: String = GOLDEN_CFG
        .lines()
        .filter(|l| !l.starts_with("output_dir"))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&path, format!("{text}{extra}")).unwrap();
    path.to_str().unwrap().to_string()
}

fn assert_one_line_error(out: &Output, category: &str) {
    let err = stderr(out);
    assert_eq!(err.lines().count(), 1, "stderr: {err}");
    assert!(err.starts_with(&format!("error[{category}]: ")), "stderr: {err}");
}

#[test]
fn run_writes_metrics_and_config_echo() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "");
    let out_dir = tmp.path().join("out");
    let out = genfl(&["run", "--config", &cfg, "--rounds", "1", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("round,mode,test_accuracy,"));
    let echo = std::fs::read_to_string(out_dir.join("config.txt")).unwrap();
    assert!(echo.contains("rounds = 1"));
    assert!(echo.contains("config_hash = "));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "");
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        let out = genfl(&["run", "--config", &cfg, "--seed", "11", "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        runs.push(std::fs::read(dir.join("metrics.csv")).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn invalid_value_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "").replace("run.cfg", "bad.cfg");
    std::fs::write(&cfg, GOLDEN_CFG.replace("alpha = 0.3", "alpha = -1")).unwrap();
    let out = genfl(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert_one_line_error(&out, "config");
    assert!(stderr(&out).contains("alpha"));
}

#[test]
fn missing_config_is_reported() {
    let out = genfl(&["run", "--config", "/nonexistent/genfl.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    assert_one_line_error(&out, "config");
}

#[test]
fn usage_errors_exit_with_two() {
    let out = genfl(&["run"]);
    assert_eq!(out.status.code(), Some(2));
    assert_one_line_error(&out, "usage");
    assert!(genfl(&["--help"]).status.success());
}

#[test]
fn empty_sweep_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "");
    let out = genfl(&["sweep", "--config", &cfg, "--axis", "alpha", "--values", ""]);
    assert_eq!(out.status.code(), Some(1));
    assert_one_line_error(&out, "sweep");
    let out = genfl(&["sweep", "--config", &cfg, "--axis", "gamma", "--values", "1"]);
    assert_one_line_error(&out, "sweep");
}

#[test]
fn sweep_writes_members_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "");
    let out_dir = tmp.path().join("sweep");
    let out = genfl(&[
        "sweep",
        "--config",
        &cfg,
        "--axis",
        "mode",
        "--values",
        "GenFL,FL-only,AIGC-only",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for v in ["GenFL", "FL-only", "AIGC-only"] {
        assert!(out_dir.join(format!("mode={v}")).join("metrics.csv").is_file());
    }
    let sweep = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 3 * 9);
    let svg = std::fs::read_to_string(out_dir.join("plot.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);

    let inputs: Vec<String> = ["GenFL", "FL-only", "AIGC-only"]
        .iter()
        .map(|v| out_dir.join(format!("mode={v}/metrics.csv")).to_str().unwrap().to_string())
        .collect();
    let plot = tmp.path().join("modes.svg");
    let out = genfl(&["plot", "--inputs", &inputs.join(","), "--out", plot.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let svg = std::fs::read_to_string(plot).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
    for label in ["GenFL", "FL-only", "AIGC-only"] {
        assert!(svg.contains(&format!(">{label}</text>")), "legend lacks {label}");
    }
}

#[test]
fn plot_rejects_malformed_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "not,a,metrics,file\n").unwrap();
    let out = genfl(&["plot", "--inputs", bad.to_str().unwrap(), "--out", tmp.path().join("p.svg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_one_line_error(&out, "metrics");
}
