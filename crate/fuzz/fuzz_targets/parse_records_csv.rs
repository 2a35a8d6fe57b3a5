#![no_main]

use libfuzzer_sys::fuzz_target;
use mmw_mec_cli::output::{emit_csv, parse_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = parse_csv(data) {
        let bytes = emit_csv(&records);
        let back = parse_csv(&bytes).expect("emitted CSV parses");
        assert_eq!(back, records);
        assert_eq!(emit_csv(&back), bytes);
    }
});
