//! Slot records as CSV or JSON, and the sweep and trace tables.

use std::fmt::Write as _;

use mmw_mec::harness::{Algorithm, Flags, FrameTrace, SlotRecord, SweepRow};
use mmw_mec::latency::Case;
use mmw_mec::pcccp::TraceRecord;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HEADER: [&str; 12] = [
    "superframe",
    "frame",
    "slot",
    "algorithm",
    "rho",
    "R1_bps",
    "R2_bps",
    "R3_bps",
    "T_total_s",
    "case",
    "penalty",
    "flags",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unexpected header `{0}`")]
    Header(String),
    #[error("row {row}, column {column}: cannot parse `{value}`")]
    Field { row: usize, column: &'static str, value: String },
}

/// One emitted row. Floats are held at the 12 significant digits that the
/// files carry, so a parsed file compares equal to what was written.
#[derive(Debug, Clone, Copy)]
pub struct OutputRecord {
    /// Global super-frame index, `trial · superframes + superframe`.
    pub superframe: u64,
    pub frame: u64,
    pub slot: u64,
    pub algorithm: Algorithm,
    pub rho: f64,
    pub rates: [f64; 3],
    pub total_latency: f64,
    pub case: Option<Case>,
    pub penalty: f64,
    pub flags: Flags,
}

fn same(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits()
}

impl PartialEq for OutputRecord {
    fn eq(&self, o: &Self) -> bool {
        self.superframe == o.superframe
            && self.frame == o.frame
            && self.slot == o.slot
            && self.algorithm == o.algorithm
            && same(self.rho, o.rho)
            && self.rates.iter().zip(&o.rates).all(|(a, b)| same(*a, *b))
            && same(self.total_latency, o.total_latency)
            && self.case == o.case
            && same(self.penalty, o.penalty)
            && self.flags == o.flags
    }
}

/// Twelve significant digits.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn round_sig(x: f64) -> f64 {
    fmt_sig(x).parse().unwrap_or(x)
}

impl OutputRecord {
    pub fn from_slot(r: &SlotRecord, superframes: usize) -> Self {
        Self {
            superframe: (r.index.trial * superframes + r.index.superframe) as u64,
            frame: r.index.frame as u64,
            slot: r.index.slot as u64,
            algorithm: r.algorithm,
            rho: round_sig(r.rho),
            rates: r.rates.map(round_sig),
            total_latency: round_sig(r.total_latency),
            case: r.case,
            penalty: round_sig(r.penalty),
            flags: r.flags,
        }
    }

    fn fields(&self) -> [String; 12] {
        [
            self.superframe.to_string(),
            self.frame.to_string(),
            self.slot.to_string(),
            self.algorithm.label().to_string(),
            fmt_sig(self.rho),
            fmt_sig(self.rates[0]),
            fmt_sig(self.rates[1]),
            fmt_sig(self.rates[2]),
            fmt_sig(self.total_latency),
            self.case.map_or(String::new(), |c| c.to_string()),
            fmt_sig(self.penalty),
            self.flags.to_string(),
        ]
    }
}

pub fn to_records(records: &[SlotRecord], superframes: usize) -> Vec<OutputRecord> {
    records.iter().map(|r| OutputRecord::from_slot(r, superframes)).collect()
}

pub fn emit(records: &[OutputRecord], format: Format) -> Vec<u8> {
    match format {
        Format::Csv => emit_csv(records),
        Format::Json => emit_json(records),
    }
}

pub fn emit_csv(records: &[OutputRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    // writing into memory cannot fail
    w.write_record(HEADER).expect("in-memory CSV write");
    for r in records {
        w.write_record(r.fields()).expect("in-memory CSV write");
    }
    w.into_inner().expect("in-memory CSV flush")
}

fn field<T>(row: usize, column: &'static str, value: &str, parse: impl FnOnce(&str) -> Option<T>) -> Result<T, OutputError> {
    parse(value).ok_or_else(|| OutputError::Field {
        row,
        column,
        value: value.to_string(),
    })
}

fn parse_case(s: &str) -> Option<Option<Case>> {
    if s.is_empty() {
        return Some(None);
    }
    Case::from_number(s.parse().ok()?).map(Some)
}

/// Floats as written by [`fmt_sig`]; anything that would print differently is rejected.
fn parse_sig(s: &str) -> Option<f64> {
    let x: f64 = s.parse().ok()?;
    (fmt_sig(x) == s).then_some(x)
}

fn parse_index(s: &str) -> Option<u64> {
    let n: u64 = s.parse().ok()?;
    (n.to_string() == s).then_some(n)
}

pub fn parse_csv(bytes: &[u8]) -> Result<Vec<OutputRecord>, OutputError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = rd.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(OutputError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let f = |c: usize| rec.get(c).unwrap_or("");
        let num = |c: usize| field(row, HEADER[c], f(c), parse_sig);
        out.push(OutputRecord {
            superframe: field(row, HEADER[0], f(0), parse_index)?,
            frame: field(row, HEADER[1], f(1), parse_index)?,
            slot: field(row, HEADER[2], f(2), parse_index)?,
            algorithm: field(row, HEADER[3], f(3), |s| s.parse::<Algorithm>().ok().filter(|a| a.label() == s))?,
            rho: num(4)?,
            rates: [num(5)?, num(6)?, num(7)?],
            total_latency: num(8)?,
            case: field(row, HEADER[9], f(9), parse_case)?,
            penalty: num(10)?,
            flags: field(row, HEADER[11], f(11), |s| s.parse::<Flags>().ok().filter(|x| x.to_string() == s))?,
        });
    }
    Ok(out)
}

/// A float in JSON: a number when finite, otherwise `"NaN"`, `"inf"` or `"-inf"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum JsonNum {
    Finite(f64),
    Special(String),
}

impl From<f64> for JsonNum {
    fn from(x: f64) -> Self {
        if x.is_finite() {
            JsonNum::Finite(x)
        } else {
            JsonNum::Special(x.to_string())
        }
    }
}

impl JsonNum {
    fn value(&self) -> Option<f64> {
        match self {
            JsonNum::Finite(x) => Some(*x),
            JsonNum::Special(s) => s.parse::<f64>().ok().filter(|x| !x.is_finite() && x.to_string() == *s),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    superframe: u64,
    frame: u64,
    slot: u64,
    algorithm: String,
    rho: JsonNum,
    #[serde(rename = "R1_bps")]
    r1: JsonNum,
    #[serde(rename = "R2_bps")]
    r2: JsonNum,
    #[serde(rename = "R3_bps")]
    r3: JsonNum,
    #[serde(rename = "T_total_s")]
    t_total: JsonNum,
    case: Option<u8>,
    penalty: JsonNum,
    flags: String,
}

pub fn emit_json(records: &[OutputRecord]) -> Vec<u8> {
    let rows: Vec<JsonRecord> = records
        .iter()
        .map(|r| JsonRecord {
            superframe: r.superframe,
            frame: r.frame,
            slot: r.slot,
            algorithm: r.algorithm.label().to_string(),
            rho: r.rho.into(),
            r1: r.rates[0].into(),
            r2: r.rates[1].into(),
            r3: r.rates[2].into(),
            t_total: r.total_latency.into(),
            case: r.case.map(Case::number),
            penalty: r.penalty.into(),
            flags: r.flags.to_string(),
        })
        .collect();
    let mut out = serde_json::to_vec_pretty(&rows).expect("records serialize");
    out.push(b'\n');
    out
}

pub fn parse_json(bytes: &[u8]) -> Result<Vec<OutputRecord>, OutputError> {
    let rows: Vec<JsonRecord> = serde_json::from_slice(bytes)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, j)| {
            let row = i + 1;
            let num = |column: &'static str, n: &JsonNum| {
                n.value().map(round_sig).ok_or_else(|| OutputError::Field {
                    row,
                    column,
                    value: format!("{n:?}"),
                })
            };
            Ok(OutputRecord {
                superframe: j.superframe,
                frame: j.frame,
                slot: j.slot,
                algorithm: field(row, "algorithm", &j.algorithm, |s| s.parse().ok())?,
                rho: num("rho", &j.rho)?,
                rates: [num("R1_bps", &j.r1)?, num("R2_bps", &j.r2)?, num("R3_bps", &j.r3)?],
                total_latency: num("T_total_s", &j.t_total)?,
                case: match j.case {
                    None => None,
                    Some(n) => Some(Case::from_number(n).ok_or_else(|| OutputError::Field {
                        row,
                        column: "case",
                        value: n.to_string(),
                    })?),
                },
                penalty: num("penalty", &j.penalty)?,
                flags: field(row, "flags", &j.flags, |s| s.parse().ok())?,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("axis,value,algorithm,mean_T_total_s,stderr_T_total_s,mean_rho,usable,failed,failure_rate\n");
    for r in rows {
        let s = &r.summary;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.axis,
            fmt_sig(r.value),
            r.algorithm,
            fmt_sig(s.mean_latency),
            fmt_sig(s.stderr_latency),
            fmt_sig(s.mean_rho),
            s.usable,
            s.failed,
            fmt_sig(s.failure_rate())
        );
    }
    out
}

/// Analog-update trace: one row per frame.
pub fn frames_csv(frames: &[FrameTrace]) -> String {
    let mut out = String::from("trial,superframe,frame,sampled_capacity,w1,w2,w3\n");
    for f in frames {
        let w = f.weights.0;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            f.trial,
            f.superframe,
            f.frame,
            fmt_sig(f.sampled_capacity),
            fmt_sig(w[0]),
            fmt_sig(w[1]),
            fmt_sig(w[2])
        );
    }
    out
}

/// Learning curve: sampled capacity per update plus the Monte-Carlo values
/// before the first and after the last update.
pub fn ssca_trace_csv(sampled: &[f64], initial: f64, last: f64) -> String {
    let mut out = String::from("iteration,sampled_capacity\n");
    for (i, c) in sampled.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, fmt_sig(*c));
    }
    let _ = writeln!(out, "# monte_carlo_initial,{}", fmt_sig(initial));
    let _ = writeln!(out, "# monte_carlo_final,{}", fmt_sig(last));
    out
}

/// Inner-iteration trace of the penalty solver, per link, with the objective
/// before and after each of the three blocks.
pub fn pcccp_trace_csv(traces: &[(usize, &[TraceRecord], &[[f64; 4]])]) -> String {
    let mut out = String::from("link,outer,inner,objective,penalty,varrho,before_block1,after_block1,after_block2,after_block3\n");
    for (link, trace, blocks) in traces {
        for (i, t) in trace.iter().enumerate() {
            let b = blocks.get(i).copied().unwrap_or([f64::NAN; 4]);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                link,
                t.outer,
                t.inner,
                fmt_sig(t.objective),
                fmt_sig(t.penalty),
                fmt_sig(t.rho),
                fmt_sig(b[0]),
                fmt_sig(b[1]),
                fmt_sig(b[2]),
                fmt_sig(b[3])
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<OutputRecord> {
        vec![
            OutputRecord {
                superframe: 0,
                frame: 3,
                slot: 7,
                algorithm: Algorithm::Pcccp,
                rho: round_sig(0.123456789012345),
                rates: [round_sig(1.0 / 3.0 * 1e9), 2.5e8, 0.0],
                total_latency: round_sig(4.2e-3),
                case: Some(Case::Two),
                penalty: 1e-12,
                flags: Flags::KEPT_INITIAL | Flags::GRID_FALLBACK,
            },
            OutputRecord {
                superframe: 5,
                frame: 0,
                slot: 0,
                algorithm: Algorithm::IdealCsi,
                rho: f64::NAN,
                rates: [f64::NAN, f64::INFINITY, -0.0],
                total_latency: f64::NAN,
                case: None,
                penalty: f64::NAN,
                flags: Flags::FAILED,
            },
        ]
    }

    #[test]
    fn empty_list_is_header_only() {
        let b = emit_csv(&[]);
        assert_eq!(String::from_utf8(b.clone()).unwrap(), format!("{}\n", HEADER.join(",")));
        assert!(parse_csv(&b).unwrap().is_empty());
        assert!(parse_json(&emit_json(&[])).unwrap().is_empty());
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_sig(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(fmt_sig(123.0), "1.23000000000e2");
        let b = String::from_utf8(emit_csv(&sample())).unwrap();
        assert!(b.lines().nth(1).unwrap().starts_with("0,3,7,pcccp,1.23456789012e-1,3.33333333333e8,"));
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let b = emit_csv(&sample());
        let parsed = parse_csv(&b).unwrap();
        assert_eq!(parsed, sample());
        assert_eq!(emit_csv(&parsed), b);
    }

    #[test]
    fn json_round_trip() {
        let b = emit_json(&sample());
        let parsed = parse_json(&b).unwrap();
        assert_eq!(parsed, sample());
        assert_eq!(emit_json(&parsed), b);
    }

    #[test]
    fn json_names_match_csv_header() {
        let v: serde_json::Value = serde_json::from_slice(&emit_json(&sample())).unwrap();
        let keys: Vec<&str> = v[0].as_object().unwrap().keys().map(String::as_str).collect();
        let mut header = HEADER.to_vec();
        header.sort_unstable();
        let mut keys = keys;
        keys.sort_unstable();
        assert_eq!(keys, header);
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(matches!(parse_csv(b"a,b\n"), Err(OutputError::Header(_))));
        let h = HEADER.join(",");
        let bad = format!("{h}\n0,0,0,pcccp,0.5,1,1,1,1,1,0,none\n");
        assert!(matches!(parse_csv(bad.as_bytes()), Err(OutputError::Field { column: "rho", .. })));
        let short = format!("{h}\n0,0,0\n");
        assert!(parse_csv(short.as_bytes()).is_err());
        assert!(parse_json(b"[{\"superframe\":0}]").is_err());
    }
}
