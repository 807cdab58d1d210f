#![no_main]

use std::sync::OnceLock;

use curvkit::io::parse_rho;
use curvkit::MarkovChain;
use libfuzzer_sys::fuzz_target;

fn chain() -> &'static MarkovChain {
    static CHAIN: OnceLock<MarkovChain> = OnceLock::new();
    CHAIN.get_or_init(|| curvkit::generate::path(5).unwrap())
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let c = chain();
    if let Ok(rho) = parse_rho(text, c) {
        assert_eq!(rho.len(), c.len());
        assert!(rho.iter().all(|v| v.is_finite() && *v >= 0.0));
    }
});
