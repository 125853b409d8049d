#![no_main]

use libfuzzer_sys::fuzz_target;
use std::sync::OnceLock;

use qgs::graph::{builtin, BuiltinName, FundamentalGraph};

fn graph() -> &'static FundamentalGraph {
    static G: OnceLock<FundamentalGraph> = OnceLock::new();
    G.get_or_init(|| builtin(BuiltinName::Graphene).unwrap())
}

// Potential files come from users; parsing and the basic accessors must not
// panic on any input.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(q) = qgs::scattering::Potential::from_json_str(text, graph()) {
        let _ = q.l1_norm();
        let _ = q.l2_norm();
        for entry in q.entries() {
            for i in 0..=8 {
                let _ = entry.eval(i as f64 / 8.0);
            }
        }
    }
});
