use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn hpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hpe")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path
}

fn solve(dir: &TempDir, json: &str) -> (Output, PathBuf, PathBuf) {
    let cfg = write_config(dir.path(), "config.json", json);
    let out = dir.path().join("out");
    let res = hpe(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    (res, cfg, out)
}

fn certify(trace: &Path, cfg: &Path) -> Output {
    hpe(&["certify", "--trace", trace.to_str().unwrap(), "--config", cfg.to_str().unwrap()])
}

fn summary(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn fb_quadratic_l1_converges_and_certifies() {
    let dir = TempDir::new().unwrap();
    let (res, cfg, out) = solve(
        &dir,
        r#"{"problem":{"name":"quadratic_l1","b":[3],"w":1},"method":"fb","x0":[0],"lambda":1,"stop_tol":1e-8}"#,
    );
    assert_eq!(code(&res), 0);
    let s = summary(&out);
    assert_eq!(s["termination"], "converged");
    assert!((s["x_final"][0].as_f64().unwrap() - 2.0).abs() <= 1e-8);
    assert_eq!(s["fejer_verdict"], "fejer");
    let res = certify(&out.join("trace.jsonl"), &cfg);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stdout));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("certification.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn fb_on_rotation_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let (res, _, out) = solve(&dir, r#"{"problem":{"name":"rotation_vi"},"method":"fb"}"#);
    assert_eq!(code(&res), 1);
    assert!(!String::from_utf8_lossy(&res.stderr).is_empty());
    assert!(!out.join("trace.jsonl").exists());
}

#[test]
fn korpelevich_rotation_reaches_zero() {
    let dir = TempDir::new().unwrap();
    let (res, cfg, out) = solve(
        &dir,
        r#"{"problem":{"name":"rotation_vi"},"method":"korpelevich","lambda":0.9,"max_iters":5000}"#,
    );
    assert_eq!(code(&res), 0);
    let x: Vec<f64> = serde_json::from_value(summary(&out)["x_final"].clone()).unwrap();
    assert!(x.iter().map(|c| c * c).sum::<f64>().sqrt() <= 1e-6);
    assert_eq!(code(&certify(&out.join("trace.jsonl"), &cfg)), 0);
}

#[test]
fn budget_exhaustion_exits_2() {
    let dir = TempDir::new().unwrap();
    let (res, cfg, out) = solve(&dir, r#"{"problem":{"name":"rotation_vi"},"method":"tseng","max_iters":5}"#);
    assert_eq!(code(&res), 2);
    assert_eq!(summary(&out)["termination"], "max_iters");
    assert_eq!(code(&certify(&out.join("trace.jsonl"), &cfg)), 0);
}

#[test]
fn rejected_certificate_exits_3() {
    // σ below the method's own bound makes Tseng certificates fail the inequality
    let dir = TempDir::new().unwrap();
    let (res, _, out) = solve(&dir, r#"{"problem":{"name":"rotation_vi"},"method":"tseng","sigma":0.01}"#);
    assert_eq!(code(&res), 3);
    assert_eq!(summary(&out)["termination"], "certificate_rejected");
}

fn edit_line(trace: &Path, line: usize, edit: impl FnOnce(&mut serde_json::Value)) {
    let text = std::fs::read_to_string(trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let mut v: serde_json::Value = serde_json::from_str(&lines[line - 1]).unwrap();
    edit(&mut v);
    lines[line - 1] = v.to_string();
    std::fs::write(trace, lines.join("\n") + "\n").unwrap();
}

const FB_RUN: &str =
    r#"{"problem":{"name":"quadratic_l1","b":[3,-0.5,1.5],"w":1},"method":"fb","x0":[0,0,0],"lambda":1.5}"#;

#[test]
fn corrupted_v_is_reported_with_its_line() {
    let dir = TempDir::new().unwrap();
    let (_, cfg, out) = solve(&dir, FB_RUN);
    let trace = out.join("trace.jsonl");
    edit_line(&trace, 3, |v| {
        let scaled: Vec<f64> = v["v"].as_array().unwrap().iter().map(|c| 1.1 * c.as_f64().unwrap()).collect();
        v["v"] = serde_json::json!(scaled);
    });
    let res = certify(&trace, &cfg);
    assert_eq!(code(&res), 4);
    assert!(String::from_utf8_lossy(&res.stdout).contains("line 3"));
}

#[test]
fn negated_eps_is_rejected() {
    let dir = TempDir::new().unwrap();
    let (_, cfg, out) = solve(&dir, FB_RUN);
    let trace = out.join("trace.jsonl");
    let text = std::fs::read_to_string(&trace).unwrap();
    let line = text
        .lines()
        .enumerate()
        .skip(1)
        .find(|(_, l)| serde_json::from_str::<serde_json::Value>(l).unwrap()["eps"].as_f64().unwrap() > 0.0)
        .map(|(i, _)| i + 1)
        .expect("fb run has a step with eps > 0");
    edit_line(&trace, line, |v| v["eps"] = serde_json::json!(-v["eps"].as_f64().unwrap()));
    let res = certify(&trace, &cfg);
    assert_eq!(code(&res), 4);
    assert!(String::from_utf8_lossy(&res.stdout).contains(&format!("line {line}")));
}

#[test]
fn unknown_trace_fields_and_versions_rejected() {
    let dir = TempDir::new().unwrap();
    let (_, cfg, out) = solve(&dir, FB_RUN);
    let trace = out.join("trace.jsonl");
    edit_line(&trace, 2, |v| v["extra"] = serde_json::json!(1));
    assert_eq!(code(&certify(&trace, &cfg)), 4);

    let (_, cfg, out) = solve(&dir, FB_RUN);
    let trace = out.join("trace.jsonl");
    edit_line(&trace, 1, |v| v["version"] = serde_json::json!(99));
    assert_eq!(code(&certify(&trace, &cfg)), 4);
}

#[test]
fn trace_from_another_config_fails() {
    let dir = TempDir::new().unwrap();
    let (_, _, out) = solve(&dir, FB_RUN);
    let other = write_config(
        dir.path(),
        "other.json",
        r#"{"problem":{"name":"quadratic_l1","b":[3,-0.5,1.5],"w":1},"method":"fb","x0":[0,0,0],"lambda":1.0}"#,
    );
    assert_eq!(code(&certify(&out.join("trace.jsonl"), &other)), 4);
}

fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_owned())
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn bench_default_suite_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let suite = Path::new(env!("CARGO_MANIFEST_DIR")).join("suites/default.json");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert_eq!(code(&hpe(&["bench", "--suite", suite.to_str().unwrap(), "--out", a.to_str().unwrap()])), 0);
    assert_eq!(code(&hpe(&["bench", "--suite", suite.to_str().unwrap(), "--out", b.to_str().unwrap()])), 0);
    let a = std::fs::read_to_string(a).unwrap();
    let b = std::fs::read_to_string(b).unwrap();
    assert!(a.lines().count() >= 6);
    assert_eq!(strip_wall_time(&a), strip_wall_time(&b));
    assert!(a.lines().next().unwrap().starts_with("problem,method,sigma,iterations"));
    // the p = 1 run still reports per-step bookkeeping
    assert!(a.lines().any(|l| l.contains("quasi_fejer")));
}

#[test]
fn bench_writes_partial_csv_on_error() {
    let dir = TempDir::new().unwrap();
    let suite = write_config(
        dir.path(),
        "suite.json",
        r#"{"runs":[{"problem":{"name":"rotation_vi"},"method":"tseng"},{"problem":{"name":"rotation_vi"},"method":"fb"}]}"#,
    );
    let csv = dir.path().join("out.csv");
    let res = hpe(&["bench", "--suite", suite.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&res), 1);
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(2).unwrap().contains("error"));
}

#[test]
fn out_dir_defaults_from_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"problem":{"name":"rotation_vi"},"method":"tseng"}"#);
    let out = dir.path().join("env-out");
    let res = Command::new(env!("CARGO_BIN_EXE_hpe"))
        .args(["solve", "--config", cfg.to_str().unwrap()])
        .env("HPE_OUT_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(code(&res), 0);
    assert!(out.join("trace.jsonl").exists());
}
