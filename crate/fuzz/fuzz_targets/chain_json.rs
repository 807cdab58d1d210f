#![no_main]

use curvkit::io::{chain_to_json, parse_chain_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(chain) = parse_chain_json(text) {
        let stats = chain.stats();
        assert!(stats.pi_min > 0.0 && stats.q_min > 0.0);
        let back = parse_chain_json(&chain_to_json(&chain)).expect("written chain parses");
        assert_eq!(back.states(), chain.states());
    }
});
