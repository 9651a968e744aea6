use std::path::Path;
use std::process::{Command, Output};

use dpt_core::io::field_from_json;
use dpt_core::suite::parse_reports;

const SUITE: &str = r#"{"jobs": [
  {"name": "flat", "module": "verify", "operation": "periodic", "grid": [8, 8],
   "parameters": {"constructor": {"tag": "constant", "a": [[2, 0], [0, 3]]}}},
  {"name": "draws", "module": "kinetic", "operation": "andreiev", "parameters": {"n": 1, "atoms": 5, "draws": 10}},
  {"name": "field", "module": "construct", "operation": "field", "grid": [8, 8],
   "parameters": {"constructor": {"tag": "constant", "a": [[1, 0], [0, 1]]}}}
]}"#;

fn dpt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn empty_suite_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.json", r#"{"jobs": []}"#);
    let out = dpt(&["report", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "[]");
    let out = dpt(&["report", "--config", &cfg, "--format", "csv"]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "name,lhs,rhs,slack,pass,resolution,tolerance\n"
    );
}

#[test]
fn failing_check_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "fail.json",
        r#"{"jobs": [{"module": "homog", "operation": "tempt_falsifier", "grid": [16, 16], "parameters": {"budget": 50}},
                     {"module": "verify", "operation": "isoperimetric",
                      "parameters": {"domain": {"kind": "ball", "center": [0, 0], "radius": 1}}}]}"#,
    );
    let out_path = dir.path().join("r.json");
    let out = dpt(&["homog", "--config", &cfg, "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let reports = parse_reports(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(reports.len(), 1);
    assert!(!reports[0].pass && reports[0].extra["closed_form_margin"] > 0.0);
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "suite.json", SUITE);
    let a = dpt(&["report", "--config", &cfg, "--jobs", "1"]);
    let b = dpt(&["report", "--config", &cfg, "--jobs", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = dpt(&["report", "--config", &cfg, "--seed", "99"]);
    assert_ne!(a.stdout, c.stdout, "the seed reaches the random study");
}

#[test]
fn strict_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "typo.json",
        &SUITE.replace(
            "\"grid\": [8, 8],\n   \"parameters\": {\"constructor\": {\"tag\": \"constant\", \"a\": [[2",
            "\"tolarance\": 1, \"grid\": [8, 8],\n   \"parameters\": {\"constructor\": {\"tag\": \"constant\", \"a\": [[2",
        ),
    );
    let out = dpt(&["report", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("tolarance"));
    let cfg = write(dir.path(), "none.json", "{}");
    assert_eq!(dpt(&["report", "--config", &cfg]).status.code(), Some(2));
    let cfg = write(dir.path(), "broken.json", "{\"jobs\": [\n  {]}");
    let err = String::from_utf8(dpt(&["verify", "--config", &cfg]).stderr).unwrap();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn subcommands_filter_and_convert() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "suite.json", SUITE);
    let out = dpt(&["verify", "--config", &cfg]);
    let reports = parse_reports(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(reports.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(), ["flat"]);
    assert_eq!(dpt(&["fluid", "--config", &cfg]).status.code(), Some(2));

    let json = dir.path().join("all.json");
    dpt(&["report", "--config", &cfg, "--out", json.to_str().unwrap()]);
    let out = dpt(&["report", "--input", json.to_str().unwrap()]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let all = parse_reports(&std::fs::read_to_string(&json).unwrap()).unwrap();
    for (line, r) in csv.lines().skip(1).zip(&all) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], r.name);
        assert_eq!(cols[1].parse::<f64>().unwrap(), r.lhs);
        assert_eq!(cols[2].parse::<f64>().unwrap(), r.rhs);
    }
}

#[test]
fn construct_dumps_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "suite.json", SUITE);
    let dump = dir.path().join("fields");
    let out = dpt(&["construct", "--config", &cfg, "--dump", dump.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let field = field_from_json(&std::fs::read_to_string(dump.join("field.json")).unwrap()).unwrap();
    assert_eq!(field.len(), 64);
}
