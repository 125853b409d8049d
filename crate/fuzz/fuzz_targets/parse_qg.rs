#![no_main]

use libfuzzer_sys::fuzz_target;

// The parser must be total: every input yields either a spec or diagnostics,
// and a parsed spec must survive graph validation without panicking.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = qgs::dsl::parse(text) {
        let _ = qgs::graph::build_graph(&spec);
    }
});
