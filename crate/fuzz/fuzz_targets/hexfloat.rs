#![no_main]

use dpt_core::hexfloat::{format_hex, parse_hex};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let input = String::from_utf8_lossy(data);
    if let Ok(x) = parse_hex(&input) {
        let back = parse_hex(&format_hex(x)).expect("formatted value parses");
        assert!(back.to_bits() == x.to_bits() || (x.is_nan() && back.is_nan()));
    }
});
