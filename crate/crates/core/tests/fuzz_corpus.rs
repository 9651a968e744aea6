//! Replays the checked-in fuzz seeds through the parser entry points.

use std::path::PathBuf;

use dpt_core::constructors::parse_constructor;
use dpt_core::hexfloat::{format_hex, parse_hex};
use dpt_core::io::{field_from_json, field_to_json};
use dpt_core::suite::{emit_report, parse_config, parse_reports, ReportFormat};
use dpt_core::{DomainSpec, GridSpec, Mesh};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(data: &[u8]) -> Option<&str> {
    std::str::from_utf8(data).ok()
}

#[test]
fn suite_config_seeds() {
    for (name, data) in seeds("suite_config") {
        let parsed = text(&data).map(parse_config);
        match name.as_str() {
            "smoke.json" | "empty.json" => assert!(matches!(parsed, Some(Ok(_))), "{name}: {parsed:?}"),
            _ => assert!(!matches!(parsed, Some(Ok(_))), "{name} should be rejected"),
        }
    }
}

#[test]
fn field_json_seeds() {
    for (name, data) in seeds("field_json") {
        let Some(t) = text(&data) else { continue };
        match field_from_json(t) {
            Ok(field) => {
                let again = field_from_json(&field_to_json(&field)).unwrap();
                assert_eq!(again.values, field.values, "{name}");
            }
            Err(e) => assert!(name != "identity_torus.json", "{name}: {e}"),
        }
    }
}

#[test]
fn hexfloat_seeds() {
    let mut accepted = 0;
    for (_, data) in seeds("hexfloat") {
        if let Ok(x) = parse_hex(&String::from_utf8_lossy(&data)) {
            accepted += 1;
            let back = parse_hex(&format_hex(x)).unwrap();
            assert!(back.to_bits() == x.to_bits() || (x.is_nan() && back.is_nan()));
        }
    }
    assert!(accepted >= 4);
}

#[test]
fn constructor_spec_seeds() {
    for (name, data) in seeds("constructor_spec") {
        let Some(Ok(spec)) = text(&data).map(parse_constructor) else {
            continue;
        };
        let mut built = false;
        for d in 2..=3 {
            let mesh = Mesh::new(DomainSpec::unit_torus(d), GridSpec::uniform(d, 4)).unwrap();
            built |= spec.build(&mesh).is_ok();
        }
        if name == "incompatible.json" {
            assert!(!built, "{name} should not build");
        } else {
            assert!(built, "{name} should build in some dimension");
        }
    }
}

#[test]
fn report_json_seeds() {
    for (name, data) in seeds("report_json") {
        let reports = parse_reports(text(&data).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
        let json = emit_report(&reports, ReportFormat::Json);
        assert_eq!(parse_reports(&json).unwrap(), reports, "{name}");
        assert_eq!(emit_report(&reports, ReportFormat::Csv).lines().count(), reports.len() + 1);
    }
}
