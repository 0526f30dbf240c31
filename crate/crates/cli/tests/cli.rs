use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn sample(name: &str) -> String {
    root().join("samples").join(name).display().to_string()
}

fn run(args: &[&str]) -> (i32, Option<Value>, String) {
    let Output { status, stdout, stderr } = Command::new(env!("CARGO_BIN_EXE_starreach"))
        .args(args)
        .output()
        .unwrap();
    let report = serde_json::from_slice(&stdout).ok();
    (status.code().unwrap(), report, String::from_utf8_lossy(&stderr).into_owned())
}

fn assert_valid(report: &Value) {
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(root().join("docs/report.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}\n{report:#}");
}

#[test]
fn unreachable_region_is_safe() {
    let (code, report, stderr) = run(&[
        "verify",
        "--network",
        &sample("identity2.nnet"),
        "--problem",
        &sample("identity_safe.json"),
    ]);
    let report = report.unwrap();
    assert_eq!(code, 0, "{stderr}");
    assert_valid(&report);
    assert_eq!(report["verdict"], "safe");
    assert_eq!(report["output_star_count"], 1);
    assert!(stderr.contains("safe"));
}

#[test]
fn violation_reports_counter_inputs() {
    let (code, report, _) = run(&[
        "verify",
        "--network",
        &sample("xor_like.nnet"),
        "--problem",
        &sample("xor_unsafe.json"),
        "--threads",
        "1",
    ]);
    let report = report.unwrap();
    assert_eq!(code, 1);
    assert_valid(&report);
    assert_eq!(report["verdict"], "unsafe");
    assert_eq!(report["violated_regions"], serde_json::json!([0]));
    // y = 2 max(|x0|, |x1|) - 0.5 >= 1 needs one coordinate at least 0.75 in magnitude
    let boxes = report["counter_inputs"].as_array().unwrap();
    assert_eq!(boxes.len(), 4);
    for b in boxes {
        let lo: Vec<f64> = serde_json::from_value(b["lower"].clone()).unwrap();
        let hi: Vec<f64> = serde_json::from_value(b["upper"].clone()).unwrap();
        assert!(lo.iter().chain(&hi).any(|v| v.abs() >= 0.75 - 1e-9), "{b}");
    }
}

#[test]
fn overapprox_violation_is_unknown() {
    let (code, report, _) = run(&[
        "verify",
        "--network",
        &sample("xor_like.nnet"),
        "--problem",
        &sample("xor_unsafe.json"),
        "--method",
        "overapprox",
    ]);
    let report = report.unwrap();
    assert_eq!(code, 2);
    assert_valid(&report);
    assert_eq!(report["output_star_count"], 1);
    assert_eq!(report["counter_inputs"], serde_json::json!([]));
}

#[test]
fn zero_timeout_exits_three_with_partial_stats() {
    let (code, report, _) = run(&[
        "verify",
        "--network",
        &sample("xor_like.nnet"),
        "--problem",
        &sample("xor_unsafe.json"),
        "--timeout",
        "0",
    ]);
    let report = report.unwrap();
    assert_eq!(code, 3);
    assert_valid(&report);
    assert_eq!(report["verdict"], "timeout");
    assert_eq!(report["output_star_count"], Value::Null);
}

#[test]
fn reach_dumps_boxes() {
    let out = tempfile::NamedTempFile::new().unwrap();
    let path = out.path().display().to_string();
    let (code, stdout, _) = run(&[
        "reach",
        "--network",
        &sample("xor_like.nnet"),
        "--problem",
        &sample("xor_unsafe.json"),
        "--out",
        &path,
    ]);
    assert_eq!(code, 0);
    assert!(stdout.is_none());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_valid(&report);
    assert_eq!(report["verdict"], "reached");
    let boxes = report["output_boxes"].as_array().unwrap();
    assert_eq!(boxes.len(), 4);
    for b in boxes {
        assert_eq!(b[0]["lower"].as_f64().unwrap(), -0.5);
        assert_eq!(b[0]["upper"].as_f64().unwrap(), 1.5);
    }
}

#[test]
fn robustness_exit_codes() {
    let net = sample("sonar_head.nnet");
    let case = |delta: &str, method: &str| {
        let (code, report, _) = run(&[
            "robust", "--network", &net, "--input", "0.9", "--delta", delta, "--label", "1", "--method", method,
        ]);
        assert_valid(report.as_ref().unwrap());
        code
    };
    assert_eq!(case("0", "exact"), 0);
    assert_eq!(case("0.05", "exact"), 0);
    assert_eq!(case("0.5", "exact"), 1);
    assert_eq!(case("0.5", "overapprox"), 2);
}

#[test]
fn key_order_is_stable() {
    let out = Command::new(env!("CARGO_BIN_EXE_starreach"))
        .args(["verify", "--network", &sample("identity2.nnet"), "--problem", &sample("identity_safe.json")])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let keys = ["\"command\"", "\"verdict\"", "\"method\"", "\"reach_time_seconds\"", "\"check_time_seconds\"", "\"output_star_count\""];
    let positions: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "{text}");
}

#[test]
fn thread_count_does_not_change_results() {
    let args = |threads: &'static str| {
        let (code, report, _) = run(&[
            "verify",
            "--network",
            &sample("xor_like.nnet"),
            "--problem",
            &sample("xor_unsafe.json"),
            "--threads",
            threads,
        ]);
        let r = report.unwrap();
        (code, r["verdict"].clone(), r["stars_per_layer"].clone(), r["counter_inputs"].clone())
    };
    assert_eq!(args("1"), args("4"));
}

#[test]
fn usage_and_parse_errors_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let bad_net = dir.path().join("bad.nnet");
    std::fs::write(&bad_net, "1,2,2,2,\n3,2,\n").unwrap();
    let (code, _, stderr) = run(&[
        "verify",
        "--network",
        &bad_net.display().to_string(),
        "--problem",
        &sample("identity_safe.json"),
    ]);
    assert_eq!(code, 4);
    assert!(stderr.contains("bad.nnet") && stderr.contains("line 2"), "{stderr}");

    let bad_problem = dir.path().join("bad.json");
    std::fs::write(&bad_problem, r#"{"input": {"box": {"lower": [0, "x"], "upper": [1, 1]}}}"#).unwrap();
    let (code, _, stderr) = run(&[
        "verify",
        "--network",
        &sample("identity2.nnet"),
        "--problem",
        &bad_problem.display().to_string(),
    ]);
    assert_eq!(code, 4);
    assert!(stderr.contains("input.box.lower[1]"), "{stderr}");

    assert_eq!(run(&["verify", "--bogus"]).0, 4);
    assert_eq!(run(&["robust", "--network", &sample("sonar_head.nnet"), "--input", "0.9", "--delta", "-1", "--label", "1"]).0, 4);
}
