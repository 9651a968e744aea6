#![no_main]

use dpt_core::io::{field_from_json, field_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(field) = field_from_json(text) {
        // anything accepted must survive a round trip unchanged
        let again = field_from_json(&field_to_json(&field)).expect("re-encoded field parses");
        assert_eq!(again.values, field.values);
    }
});
