#![no_main]

use dpt_core::suite::{emit_report, parse_reports, ReportFormat};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(reports) = parse_reports(text) {
        let _ = emit_report(&reports, ReportFormat::Csv);
        let json = emit_report(&reports, ReportFormat::Json);
        assert_eq!(parse_reports(&json).expect("emitted JSON parses").len(), reports.len());
    }
});
