use std::path::Path;
use std::process::{Command, Output};

fn padamp(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_padamp"))
        .args(args)
        .env("PADAMP_OUT_DIR", out_dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_telemetry_that_check_accepts() {
    let dir = tempfile::tempdir().unwrap();
    let o = padamp(&["run", "--set", "objective.name=logistic", "--steps", "120", "--seed", "4"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let tel = dir.path().join("run.csv");
    for f in ["run.csv", "run.diagnostics.csv", "run.convergence.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let text = std::fs::read_to_string(&tel).unwrap();
    assert_eq!(text.lines().count(), 121);
    assert!(text.starts_with(
        "t,epoch,eta_t,p_now,loss,grad_norm_sq,w.param_norm,w.cos_sim,w.projected,w.effective_step_norm,lemma2_residual,lemma3_margin"
    ));

    let report = dir.path().join("check.csv");
    let c = padamp(&["check", tel.to_str().unwrap(), "--out", report.to_str().unwrap()], dir.path());
    assert!(c.status.success(), "{}", stdout(&c));
    assert!(std::fs::read_to_string(report).unwrap().starts_with("check,value,pass"));
}

#[test]
fn check_rejects_a_broken_identity_residual() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let o = padamp(&["run", "--steps", "20", "--out", out.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cols: Vec<String> = lines[5].split(',').map(String::from).collect();
    let n = cols.len();
    cols[n - 2] = "1e-3".into();
    lines[5] = cols.join(",");
    std::fs::write(&out, lines.join("\n") + "\n").unwrap();
    let c = padamp(&["check", out.to_str().unwrap()], dir.path());
    assert!(!c.status.success());
    assert!(stdout(&c).contains("first_moment_identity_residual"));
}

#[test]
fn invalid_configs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["run", "--steps", "0"],
        vec!["run", "--set", "hp.p=0.8"],
        vec!["run", "--set", "nonsense=1"],
        vec!["sweep", "--axis", "hp.p", "--values", ""],
    ] {
        let o = padamp(&args, dir.path());
        assert!(!o.status.success(), "{args:?} should fail");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "objective.name = rosenbrock\noptimizer.kind = adam\nbudget.steps = 5000\n").unwrap();
    let o = padamp(&["run", "--config", cfg.to_str().unwrap(), "--steps", "30"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("adam on rosenbrock: 30 steps"));
}

#[test]
fn sweep_writes_a_sorted_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = padamp(
        &["sweep", "--set", "objective.name=mlp", "--axis", "hp.p", "--values", "0.25;0.2;0.125", "--steps", "40"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("sweep/summary.csv")).unwrap();
    let losses: Vec<f64> = summary
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(losses.len(), 3);
    assert!(losses.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn norm_sim_reports_the_limit() {
    let dir = tempfile::tempdir().unwrap();
    let o = padamp(&["norm-sim", "--beta", "0.9", "--steps", "20000", "--jitter", "0.5", "--seed", "3"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("limit 19.000000"));
    assert!(dir.path().join("norm_sim.csv").exists());
}

#[test]
fn grad_check_passes_on_every_objective() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["quadratic", "rosenbrock", "scale_invariant", "logistic", "mlp"] {
        let o = padamp(&["grad-check", "--set", &format!("objective.name={name}"), "--steps", "5"], dir.path());
        assert!(o.status.success(), "{name}: {}", stdout(&o));
    }
}
