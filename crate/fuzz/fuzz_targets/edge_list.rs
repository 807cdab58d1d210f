#![no_main]

use curvkit::io::parse_edge_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(chain) = parse_edge_list(text) {
        let total: f64 = chain.pi().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(chain.distance_matrix().iter().flatten().all(|&d| d < chain.len()));
    }
});
