use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn qmonitor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmonitor")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qmonitor-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn analytic_curve_spans_the_support() {
    let o = qmonitor(&["analytic", "--dist", "F-r-2q", "--grid", "11"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(text.lines().next(), Some("x,pdf,cdf"));
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0][2], 0.0);
    assert!((rows[10][2] - 1.0).abs() < 1e-9);
    assert!((rows[5][1] - 1.5).abs() < 1e-9);
}

#[test]
fn flags_override_the_config_file() {
    let dir = scratch("override");
    let cfg = dir.join("a.cfg");
    fs::write(&cfg, "dist = F-r1\ngrid = 3\n").unwrap();
    let from_file = stdout(&qmonitor(&["analytic", "--config", cfg.to_str().unwrap()]));
    assert_eq!(from_file.lines().count(), 4);
    assert!(from_file.contains("0.5,1,0.5"));
    let overridden = stdout(&qmonitor(&["analytic", "--config", cfg.to_str().unwrap(), "--dist", "F-r-2q"]));
    assert!(overridden.contains("0.5,1.5,"));
    fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(qmonitor(&["analytic", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn compare_exit_code_follows_the_threshold() {
    let dir = scratch("compare");
    let file = dir.join("u.csv");
    let body: String = (0..2000).map(|i| format!("{}\n", (i as f64 + 0.5) / 2000.0)).collect();
    fs::write(&file, format!("value\n{body}")).unwrap();
    let f = file.to_str().unwrap();
    assert_eq!(qmonitor(&["compare", "--samples", f, "--dist", "F-r1"]).status.code(), Some(0));
    assert_eq!(qmonitor(&["compare", "--samples", f, "--dist", "F-r-2q"]).status.code(), Some(1));
    assert_eq!(qmonitor(&["compare", "--samples", f, "--dist", "nonsense"]).status.code(), Some(2));
}

#[test]
fn coefficients_with_monte_carlo() {
    let o = qmonitor(&[
        "coeffs", "--scenario", "monitored-one-of-two", "--lambda", "1", "--point", "r=0.4,R=0.55,C=0.02",
        "--samples", "50000", "--seed", "9",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("d_r          0.100000"));
    assert!(text.contains("PASS"));
    let bad = qmonitor(&["coeffs", "--scenario", "free-single", "--point", "r=1.5"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn simulate_writes_histograms_and_summary() {
    let dir = scratch("simulate");
    let o = qmonitor(&[
        "simulate", "--scenario", "free-single", "--epsilon", "0.2", "--steps", "60000", "--trajectories", "2",
        "--seed", "4", "--out", dir.to_str().unwrap(),
    ]);
    assert!(o.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.join("histograms.csv")).unwrap();
    assert!(csv.starts_with("observable,bin_left,bin_right,count\n"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    for key in ["config", "ks_table", "runtime_seconds", "seed"] {
        assert!(summary.get(key).is_some(), "{key}");
    }
    assert_eq!(summary["seed"], 4);
    let passed = summary["ks_table"].as_array().unwrap().iter().all(|c| c["pass"] == true || c["required"] == false);
    assert_eq!(o.status.success(), passed);
}

#[test]
fn invalid_inputs_exit_with_two() {
    assert_eq!(qmonitor(&["kicked-top", "--j", "7"]).status.code(), Some(2));
    assert_eq!(qmonitor(&["figure", "--id", "fig9"]).status.code(), Some(2));
    assert_eq!(qmonitor(&["simulate", "--qubits", "3", "--observables", "C"]).status.code(), Some(2));
}

#[test]
fn short_kicked_top_run() {
    let dir = scratch("top");
    let o = qmonitor(&[
        "kicked-top", "--j", "15/2", "--steps", "20000", "--burn-in", "50", "--trajectories", "2", "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(o.status.code().is_some_and(|c| c <= 1));
    let text = stdout(&o);
    assert!(text.contains("every-slice KS vs M-r-1ofq (N=16, Lambda=0.1)"), "{text}");
    assert!(dir.join("summary.json").exists());
}
