//! Parser properties shared with the fuzz targets: replay of the checked-in
//! fuzz corpus, plus random and mutated inputs.

use std::path::PathBuf;

use mmw_mec::harness::{run, Algorithm};
use mmw_mec_cli::config::{parse_config, to_text, RunConfig};
use mmw_mec_cli::output::{emit_csv, emit_json, parse_csv, parse_json, to_records};
use proptest::prelude::*;

fn config_round_trip(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = parse_config(text) {
        let canonical = to_text(&c);
        let back = parse_config(&canonical).expect("canonical text parses");
        assert_eq!(back, c);
        assert_eq!(to_text(&back), canonical);
    }
}

fn csv_round_trip(data: &[u8]) {
    if let Ok(records) = parse_csv(data) {
        let bytes = emit_csv(&records);
        let back = parse_csv(&bytes).expect("emitted CSV parses");
        assert_eq!(back, records);
        assert_eq!(emit_csv(&back), bytes);
    }
}

fn json_round_trip(data: &[u8]) {
    if let Ok(records) = parse_json(data) {
        let bytes = emit_json(&records);
        let back = parse_json(&bytes).expect("emitted JSON parses");
        assert_eq!(back, records);
        assert_eq!(emit_json(&back), bytes);
    }
}

fn corpus(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus {}", dir.display());
    files.into_iter().map(|p| std::fs::read(p).unwrap()).collect()
}

#[test]
fn corpus_replays() {
    for d in corpus("parse_config") {
        config_round_trip(&d);
    }
    let csv = corpus("parse_records_csv");
    assert!(csv.iter().all(|d| parse_csv(d).is_ok()));
    for d in &csv {
        csv_round_trip(d);
    }
    let json = corpus("parse_records_json");
    assert!(json.iter().all(|d| parse_json(d).is_ok()));
    for d in &json {
        json_round_trip(d);
    }
}

fn simulated() -> Vec<u8> {
    let mut c = RunConfig::desk_scale().scenario;
    (c.trials, c.frames, c.slots, c.algorithm) = (1, 2, 2, Algorithm::Heuristic);
    emit_csv(&to_records(&run(&c).unwrap().records, c.superframes))
}

#[test]
fn emitted_records_survive_both_formats() {
    let csv = simulated();
    let records = parse_csv(&csv).unwrap();
    assert_eq!(records.len(), 4);
    assert_eq!(parse_json(&emit_json(&records)).unwrap(), records);
}

proptest! {
    #[test]
    fn config_text_never_panics(s in "[a-z_.: 0-9#\n,-]{0,200}") {
        config_round_trip(s.as_bytes());
    }

    #[test]
    fn config_lines_from_known_keys(lines in prop::collection::vec((0usize..48, "[-0-9.e a-z]{0,12}"), 0..8)) {
        let text: String = lines
            .iter()
            .map(|(k, v)| format!("{}: {v}\n", mmw_mec_cli::config::KEYS[*k]))
            .collect();
        config_round_trip(text.as_bytes());
    }

    #[test]
    fn mutated_csv(pos in 0usize..4096, byte in any::<u8>()) {
        let mut d = simulated();
        let i = pos % d.len();
        d[i] = byte;
        csv_round_trip(&d);
    }

    #[test]
    fn arbitrary_bytes(d in prop::collection::vec(any::<u8>(), 0..256)) {
        csv_round_trip(&d);
        json_round_trip(&d);
        config_round_trip(&d);
    }
}
