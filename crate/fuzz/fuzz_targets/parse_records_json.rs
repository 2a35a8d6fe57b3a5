#![no_main]

use libfuzzer_sys::fuzz_target;
use mmw_mec_cli::output::{emit_json, parse_json};

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = parse_json(data) {
        let bytes = emit_json(&records);
        let back = parse_json(&bytes).expect("emitted JSON parses");
        assert_eq!(back, records);
        assert_eq!(emit_json(&back), bytes);
    }
});
