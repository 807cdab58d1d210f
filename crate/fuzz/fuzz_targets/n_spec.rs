#![no_main]

use curvkit::io::{format_n, parse_n};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(n) = parse_n(text) {
        assert!(n > 0.0);
        assert_eq!(parse_n(&format_n(n)).unwrap(), n);
    }
});
