use std::path::Path;
use std::process::{Command, Output};

fn cq(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cq"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("CQ_THREADS", t),
        None => cmd.env_remove("CQ_THREADS"),
    };
    cmd.output().expect("cq runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const MANUFACTURED: &str = r#"
[problem]
n = 3
k = 1
m = 11
mode = "manufactured"
surface = "quartic"
surface_params = [1, 1, 1, 1]
initial_bump = 0.15
"#;

#[test]
fn surface_report_and_patch() {
    let out = cq(
        &["surface", "--kind", "sphere", "--params", "2", "--n", "2", "--r", "1", "--m", "9", "--report"],
        None,
    );
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["kind"], "sphere");
    assert_eq!(v["m"], 9);
    assert!(v["curvature_error"].as_f64().unwrap() < 1e-2);

    let out = cq(&["surface", "--kind", "paraboloid", "--params", "1", "--n", "2", "--r", "1", "--m", "5"], None);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 26);
    assert_eq!(text.lines().next(), Some("x1,x2,u"));
    assert_eq!(text.lines().nth(13), Some("0,0,0"));
}

#[test]
fn usage_errors_exit_2() {
    let cases: [&[&str]; 5] = [
        &["surface", "--kind", "cube", "--n", "2", "--r", "1", "--m", "5"],
        &["surface", "--kind", "sphere", "--params", "1", "--n", "3", "--r", "1", "--m", "9"],
        &["verify", "--n", "3", "--dist", "cauchy", "--out", "x.csv"],
        &["verify", "--n", "5..3", "--out", "x.csv"],
        &["frobnicate"],
    ];
    for args in cases {
        assert_eq!(code(&cq(args, None)), 2, "{args:?}");
    }
    let out = cq(&["surface", "--kind", "sphere", "--params", "2", "--n", "2", "--r", "1", "--m", "5"], Some("0"));
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_is_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let base = ["verify", "--n", "3..4", "--samples", "3000", "--seed", "7", "--dist", "loguniform", "--tol", "1e-9"];
    let mut args_a = base.to_vec();
    args_a.extend(["--out", path_str(&a)]);
    let mut args_b = base.to_vec();
    args_b.extend(["--out", path_str(&b)]);
    assert_eq!(code(&cq(&args_a, Some("1"))), 0);
    assert_eq!(code(&cq(&args_b, Some("3"))), 0);
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    assert!(text.starts_with("lemma_id,n,samples,min_gap,argmin_lambda,implied_constant_max,violations\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn solve_writes_patch_sidecar_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("p.toml");
    std::fs::write(&config, MANUFACTURED).unwrap();
    let prefix = dir.path().join("run");
    let out = cq(&["solve", "--config", path_str(&config), "--out-prefix", path_str(&prefix)], Some("1"));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "converged");
    assert!(v["residual"].as_f64().unwrap() <= 1e-9);

    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(meta["kind"], "quartic");
    assert_eq!(meta["m"], 11);
    let patch = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert_eq!(patch.lines().count(), 1 + 11 * 11 * 11);
    let trace = std::fs::read_to_string(dir.path().join("run_trace.csv")).unwrap();
    assert!(trace.starts_with("iter,residual_max,step_length,admissible\n0,"));
}

#[test]
fn solve_without_convergence_exits_1_and_keeps_trace() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("p.toml");
    std::fs::write(&config, format!("[solver]\nmax_iters = 1\n{MANUFACTURED}")).unwrap();
    let prefix = dir.path().join("run");
    let out = cq(&["solve", "--config", path_str(&config), "--out-prefix", path_str(&prefix)], None);
    assert_eq!(code(&out), 1);
    let trace = std::fs::read_to_string(dir.path().join("run_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3);
}

#[test]
fn solve_rejects_multi_job_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("p.toml");
    std::fs::write(&config, format!("[sweep]\nm = [9, 11]\n{MANUFACTURED}")).unwrap();
    let prefix = dir.path().join("run");
    let out = cq(&["solve", "--config", path_str(&config), "--out-prefix", path_str(&prefix)], None);
    assert_eq!(code(&out), 2);
}

#[test]
fn sweep_csv_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.toml");
    std::fs::write(&empty, "# nothing to run\n").unwrap();
    let csv = dir.path().join("e.csv");
    let out = cq(&["sweep", "--config", path_str(&empty), "--out", path_str(&csv)], None);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("problem,n,k,m,status,"));

    let config = dir.path().join("s.toml");
    std::fs::write(
        &config,
        r#"
[sweep]
m = [9]

[problem.good]
n = 2
k = 1
surface = "sphere"
surface_params = [2]

[problem.bad_guess]
n = 2
k = 1
surface = "sphere"
surface_params = [2]
initial_bump = -3
"#,
    )
    .unwrap();
    let csv = dir.path().join("s.csv");
    let out = cq(&["sweep", "--config", path_str(&config), "--out", path_str(&csv)], Some("2"));
    assert_eq!(code(&out), 1);
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("problem.good,2,1,9,ok,"));
    assert!(rows[2].starts_with("problem.bad_guess,2,1,9,error,"));

    let broken = dir.path().join("b.toml");
    std::fs::write(&broken, "[problem]\nn = 3\nsurface = \"sphere\"\nsurface_params = [2]\nwidth = 1\n").unwrap();
    let out = cq(&["sweep", "--config", path_str(&broken), "--out", path_str(&csv)], None);
    assert_eq!(code(&out), 2);
}
