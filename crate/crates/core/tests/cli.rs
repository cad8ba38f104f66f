use std::path::Path;
use std::process::{Command, Output};

fn mdla(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdla")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn predict_prints_json() {
    let out = mdla(&["predict", "--mu", "1", "--mode", "discrete"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["regime"], "critical");
    assert!((v["constant"].as_f64().unwrap() - 0.6082).abs() < 1e-3);
}

#[test]
fn simulate_fit_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = mdla(&[
        "simulate", "--mu", "1.02", "--mode", "discrete", "--horizon", "4096", "--runs", "4", "--seed", "3",
        "--init", "wave", "--profile-width", "32", "--out", path(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trajectories.csv", "profiles.csv", "report.json", "report.txt", "spec.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let header = std::fs::read_to_string(out_dir.join("trajectories.csv")).unwrap();
    assert!(header.starts_with("run_id,t,R,L,D,alive"));

    let fit = mdla(&["fit", "--in", path(&out_dir), "--t-min", "256"]);
    assert_eq!(code(&fit), 0);
    let v: serde_json::Value = serde_json::from_slice(&fit.stdout).unwrap();
    assert!(v["alpha"].as_f64().unwrap() > 0.5);

    std::fs::remove_file(out_dir.join("report.json")).unwrap();
    let rep = mdla(&["report", "--in", path(&out_dir), "--mode", "discrete", "--mu", "1.02"]);
    assert_eq!(code(&rep), 0);
    assert!(String::from_utf8_lossy(&rep.stdout).contains("R(T)"));
    assert!(out_dir.join("report.json").exists());
}

#[test]
fn same_command_twice_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let d = dir.path().join(name);
        let out = mdla(&["simulate", "--mu", "0.6", "--mode", "continuous", "--horizon", "200", "--runs", "3", "--out", path(&d)]);
        assert_eq!(code(&out), 0);
        std::fs::read(d.join("trajectories.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out_dir = dir.path().join("out");
    std::fs::write(&cfg, format!("# ensemble\nmu = 0.5\nmode = discrete\nhorizon = 64\nruns = 2\nout = {}\n", path(&out_dir))).unwrap();
    let out = mdla(&["--config", path(&cfg), "simulate", "--runs", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let spec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("spec.json")).unwrap()).unwrap();
    assert_eq!(spec["runs"], 3);
    assert_eq!(spec["params"]["mu"], 0.5);
}

#[test]
fn stefan_writes_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdla(&["stefan", "--mu", "0.4382", "--s-end", "0.01", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(csv.starts_with("s,xi,mu\n"));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["r"].as_f64().unwrap() - v["r_similarity"].as_f64().unwrap()).abs() < 1e-3);
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = path(dir.path());
    assert_eq!(code(&mdla(&["simulate", "--mu", "-1", "--mode", "discrete", "--horizon", "10", "--out", o])), 2);
    assert_eq!(code(&mdla(&["simulate", "--mu", "0.5", "--mode", "discrete", "--horizon", "10", "--init", "wave", "--out", o])), 2);
    assert_eq!(code(&mdla(&["simulate", "--mu", "0.5", "--mode", "discrete", "--out", o])), 2);
    assert_eq!(code(&mdla(&["stefan", "--mu", "0.4382", "--ds", "0.01", "--out", o])), 2);
    assert_eq!(code(&mdla(&["predict", "--mu", "1", "--mode", "sideways"])), 2);
    assert_eq!(code(&mdla(&["--config", "/nonexistent/run.cfg", "predict"])), 2);
}

#[test]
fn runtime_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("trajectories.csv"), "run_id,t,R,L,D,alive\n0,0,0,0,0,5\n0,1,1,0,1,4\n").unwrap();
    let out = mdla(&["fit", "--in", path(dir.path()), "--t-min", "0"]);
    assert_eq!(code(&out), 3);
}
