//! Golden-file tests for the CLI: every subcommand runs on a checked-in
//! problem file, must match its checked-in JSON report byte for byte, and
//! must produce byte-identical output across repeated runs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CASES: &[(&str, &str, i32)] = &[
    ("analyze", "mercedes", 0),
    ("parseval", "identity_frame", 0),
    ("scale", "scalable", 0),
    ("piecewise-check", "piecewise_disjoint", 0),
    ("piecewise-build", "piecewise_build", 0),
    ("vi-solve", "vi_problem", 0),
    ("bounds", "bounds_problem", 0),
];

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kframekit"))
        .args(args)
        .current_dir(fixtures_dir())
        .output()
        .expect("binary runs")
}

#[test]
fn criterion_8_golden_reports_byte_identical() {
    for &(cmd, fixture, expected_exit) in CASES {
        let file = format!("{fixture}.json");
        let first = run(&[cmd, &file, "--output", "json"]);
        let second = run(&[cmd, &file, "--output", "json"]);
        assert_eq!(
            first.status.code(),
            Some(expected_exit),
            "{cmd} {file}: exit code"
        );
        assert_eq!(
            first.stdout, second.stdout,
            "{cmd} {file}: reports differ across runs"
        );

        let golden_path = golden_dir().join(format!("{cmd}__{fixture}.json"));
        let golden = std::fs::read(&golden_path).expect("golden file present");
        assert_eq!(
            String::from_utf8_lossy(&first.stdout),
            String::from_utf8_lossy(&golden),
            "{cmd} {file}: report does not match golden file"
        );
    }
    println!("criterion 8 (CLI determinism, 7 golden subcommand reports): PASS");
}

#[test]
fn text_output_is_also_deterministic() {
    for &(cmd, fixture, _) in CASES {
        let file = format!("{fixture}.json");
        let first = run(&[cmd, &file]);
        let second = run(&[cmd, &file]);
        assert_eq!(first.stdout, second.stdout, "{cmd} {file}: text differs");
        assert!(!first.stdout.is_empty());
    }
}

#[test]
fn reports_parse_as_json_with_expected_envelope() {
    for &(cmd, fixture, _) in CASES {
        let file = format!("{fixture}.json");
        let out = run(&[cmd, &file, "--output", "json"]);
        let value: serde_json::Value =
            serde_json::from_slice(&out.stdout).expect("stdout is valid json");
        assert_eq!(value["command"], cmd);
        assert_eq!(value["input"], file);
        assert!(value["input_digest"]
            .as_str()
            .unwrap()
            .starts_with("sha256:"));
        assert!(value["result"].is_object());
    }
}

#[test]
fn exit_code_one_for_checked_false() {
    // Two copies of e1 cannot be scaled into a Parseval frame for K = I.
    let dir = fixtures_dir();
    std::fs::write(
        dir.join("tmp_unscalable.json"),
        r#"{"dimension":2,"frame":[[1.0,0.0],[1.0,0.0]]}"#,
    )
    .unwrap();
    let out = run(&["scale", "tmp_unscalable.json", "--output", "json"]);
    assert_eq!(out.status.code(), Some(1));
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["result"]["feasible"], false);
    let residual = value["result"]["residual"].as_f64().unwrap();
    assert!((residual - 1.0).abs() < 1e-9, "residual {residual}");

    let out = run(&["parseval", "tmp_unscalable.json"]);
    assert_eq!(out.status.code(), Some(1));
    std::fs::remove_file(dir.join("tmp_unscalable.json")).unwrap();
}

#[test]
fn exit_code_two_for_input_errors() {
    // Missing file.
    let out = run(&["parseval", "no_such_file.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    // Bad JSON.
    let dir = fixtures_dir();
    std::fs::write(dir.join("tmp_bad.json"), "{oops").unwrap();
    let out = run(&["parseval", "tmp_bad.json"]);
    assert_eq!(out.status.code(), Some(2));

    // Shape error with a positional message.
    std::fs::write(
        dir.join("tmp_shape.json"),
        r#"{"dimension":2,"frame":[[1.0,0.0],[1.0]]}"#,
    )
    .unwrap();
    let out = run(&["parseval", "tmp_shape.json", "--output", "json"]);
    assert_eq!(out.status.code(), Some(2));
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(value["result"]["message"]
        .as_str()
        .unwrap()
        .contains("frame[1]"));

    // Missing required field for the subcommand.
    let out = run(&["vi-solve", "identity_frame.json"]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown subcommand: usage text, exit 2 (clap's parse-error code).
    let out = run(&["frobnicate", "identity_frame.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    std::fs::remove_file(dir.join("tmp_bad.json")).unwrap();
    std::fs::remove_file(dir.join("tmp_shape.json")).unwrap();
}

#[test]
fn flag_overrides_take_precedence_over_file() {
    let out = run(&[
        "parseval",
        "identity_frame.json",
        "--tol",
        "1e-6",
        "--output",
        "json",
    ]);
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["tol"].as_f64().unwrap(), 1e-6);
}

#[test]
fn wall_time_goes_to_stderr_not_stdout() {
    let out = run(&["parseval", "identity_frame.json", "--output", "json"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(!stdout.contains("ms"));
    assert!(stderr.contains("finished in"));
}
