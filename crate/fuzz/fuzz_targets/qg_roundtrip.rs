#![no_main]

use libfuzzer_sys::fuzz_target;

// Everything the parser accepts must serialize back to text that parses to
// the identical spec.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = qgs::dsl::parse(text) {
        let canonical = qgs::dsl::serialize(&spec);
        let reparsed = qgs::dsl::parse(&canonical).expect("canonical text parses");
        assert_eq!(reparsed, spec, "round trip changed the spec");
    }
});
