use std::path::Path;
use std::process::{Command, Output};

fn hcsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcsp")).args(args).output().expect("hcsp runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn verify_exit_codes_follow_the_verdict() {
    let coarse = hcsp(&["verify", "@watertank", "--h", "0.2", "--eps", "0.2", "--safe", "d=3.3:6.6"]);
    assert_eq!(coarse.status.code(), Some(1), "{}", stderr(&coarse));
    assert!(stdout(&coarse).contains(r#""verdict": "not-proven""#));
    let fine = hcsp(&["verify", "@watertank", "--h", "0.05", "--eps", "0.1", "--safe", "d=3.3:6.6"]);
    assert_eq!(fine.status.code(), Some(0), "{}", stderr(&fine));
    assert!(stdout(&fine).contains(r#""verdict": "safe""#));
}

#[test]
fn bundled_model_file_matches_the_alias() {
    let file = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/models/watertank.hcsp");
    let a = hcsp(&["parse", file]);
    let b = hcsp(&["parse", "@watertank"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn syntax_error_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.hcsp", "x := ;\n");
    let out = hcsp(&["parse", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("1:6"), "{}", stderr(&out));
    assert_eq!(hcsp(&["parse", "/nonexistent/model.hcsp"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(hcsp(&["verify", "@watertank", "--eps", "0.1"]).status.code(), Some(2));
    assert_eq!(hcsp(&["frobnicate"]).status.code(), Some(2));
    let out = hcsp(&["verify", "@watertank", "--h", "0.1", "--eps", "0.1", "--safe", "d=6:3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("empty interval"));
}

#[test]
fn artifacts_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = hcsp(&[
            "bisim",
            "@watertank",
            "--horizon",
            "3",
            "--h",
            "0.05",
            "--eps",
            "0.1",
            "--emit-json",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        std::fs::read(path).unwrap()
    };
    let (a, b) = (run("a.json"), run("b.json"));
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let json: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(json["bisimilar"], true);
    assert!(json["relation"].as_array().is_some_and(|p| !p.is_empty()));

    let reach = |name: &str| {
        let path = dir.path().join(name);
        let out =
            hcsp(&["reach", "@watertank", "--horizon", "3", "--h", "0.1", "--eps", "0.1", "--emit-json"]).status.code();
        assert_eq!(out, Some(2), "--emit-json needs a path");
        let out = hcsp(&[
            "reach",
            "@watertank",
            "--horizon",
            "3",
            "--h",
            "0.1",
            "--eps",
            "0.1",
            "--emit-json",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        std::fs::read(path).unwrap()
    };
    assert_eq!(reach("r1.json"), reach("r2.json"));
}

#[test]
fn discretized_output_reparses() {
    let out = hcsp(&["discretize", "@watertank", "--h", "0.05", "--eps", "0.1", "--tmap", "fill=95,drain=8.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let m = hcsp::syntax::parse_model(&text).unwrap();
    assert!(!m.system.has_ode());
    assert!(text.contains("*{1900}"));

    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "wts.hcsp", &text);
    let parsed = hcsp(&["parse", &path]);
    assert_eq!(parsed.status.code(), Some(0));
    assert_eq!(stdout(&parsed), text);
}

#[test]
fn explain_step_goes_to_stderr() {
    let out = hcsp(&["discretize", "@watertank", "--h", "0.05", "--eps", "0.1", "--explain-step"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("ode fill"), "{}", stderr(&out));
    assert!(hcsp::syntax::parse_model(&stdout(&out)).is_ok());
}

#[test]
fn simulate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "decay.hcsp", "<x_dot = -x & x > 0.5>\n");
    let out = hcsp(&["simulate", &model, "--init", "x=1", "--d", "0.25"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = stdout(&out);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("time,variable,value"));
    assert_eq!(lines.next(), Some("0,x,1"));
    let last: f64 = csv.lines().last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((last - 0.5).abs() < 1e-6, "{csv}");
}

#[test]
fn robust_guard_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "guard.hcsp", "x > 0 -> skip\n");
    let out = hcsp(&["robust", &model, "--init", "x=0.1", "--eps", "0.5", "--delta", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["verdict"], "violated");
    assert_eq!(json["witnesses"][0]["clause"], 2);
    let ok = hcsp(&["robust", &model, "--init", "x=1", "--eps", "0.5", "--delta", "0.5"]);
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn horizon_flag_needs_a_bound() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "p.hcsp", "wait 1\n");
    let out = hcsp(&["parse", &model, "--horizon", "3"]);
    assert_eq!(out.status.code(), Some(2));
}
