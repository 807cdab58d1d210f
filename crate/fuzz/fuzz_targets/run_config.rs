#![no_main]

use curvkit_cli::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_json(text) {
        let again = RunConfig::from_json(&cfg.to_json()).expect("written config parses");
        assert_eq!(again.command, cfg.command);
        assert_eq!(again.input, cfg.input);
    }
});
