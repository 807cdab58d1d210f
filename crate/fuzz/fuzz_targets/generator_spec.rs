#![no_main]

use curvkit::io::parse_generator;
use curvkit::Generator;
use libfuzzer_sys::fuzz_target;

fn small(g: &Generator) -> bool {
    match *g {
        Generator::Hypercube { dim } => dim <= 6,
        Generator::Cycle { n } | Generator::Complete { n } | Generator::Path { n } => n <= 64,
        Generator::RandomRegular { d, n, .. } => n <= 64 && d <= 8,
    }
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = parse_generator(text) {
        assert_eq!(parse_generator(&g.to_string()).unwrap(), g);
        if small(&g) {
            let _ = g.build();
        }
    }
});
