#![no_main]

use dpt_core::constructors::parse_constructor;
use dpt_core::{DomainSpec, GridSpec, Mesh};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = parse_constructor(text) else { return };
    // building on a small torus must fail cleanly, never panic
    for d in 2..=3 {
        if let Ok(mesh) = Mesh::new(DomainSpec::unit_torus(d), GridSpec::uniform(d, 4)) {
            let _ = spec.build(&mesh);
        }
    }
});
