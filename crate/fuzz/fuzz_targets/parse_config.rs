#![no_main]

use libfuzzer_sys::fuzz_target;
use mmw_mec_cli::config::{parse_config, to_text};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = parse_config(text) {
        let canonical = to_text(&c);
        let back = parse_config(&canonical).expect("canonical text parses");
        assert_eq!(back, c);
        assert_eq!(to_text(&back), canonical);
    }
});
