use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mmw_mec::checks::{run_checks, CheckOutcome, Effort};
use mmw_mec::harness::{pcccp_convergence, run, run_sweep, ssca_learning, summarize, Algorithm, SweepAxis, SweepRow};

use crate::config::{to_text, RunConfig};
use crate::manifest::RunManifest;
use crate::output::{self, Format};

/// What a subcommand produced and whether it met its success criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub success: bool,
    /// Human-readable report for stdout.
    pub report: String,
    pub outputs: Vec<PathBuf>,
}

struct Writer {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Writer {
    fn new(dir: &Path, command: &str, config: &RunConfig) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut w = Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest::new(command, config, chrono::Utc::now()),
        };
        w.write("config.txt", to_text(config).as_bytes())?;
        Ok(w)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.add_output(&path);
        Ok(())
    }

    fn finish(self, success: bool, report: String) -> Result<Outcome> {
        let path = self.dir.join("manifest.json");
        fs::write(&path, self.manifest.to_json()).with_context(|| format!("writing {}", path.display()))?;
        let mut outputs: Vec<PathBuf> = self.manifest.outputs.iter().map(PathBuf::from).collect();
        outputs.push(path);
        Ok(Outcome { success, report, outputs })
    }
}

/// Single scenario: slot records, the per-frame analog trace and a manifest.
pub fn run_command(config: &RunConfig, out: &Path, format: Format) -> Result<Outcome> {
    let s = &config.scenario;
    let result = run(s)?;
    let mut w = Writer::new(out, "run", config)?;
    let records = output::to_records(&result.records, s.superframes);
    w.write(&format!("records.{}", format.extension()), &output::emit(&records, format))?;
    w.write("frames.csv", output::frames_csv(&result.frames).as_bytes())?;
    let sum = summarize(&result.records);
    let ok = sum.failure_rate() <= config.max_failure_rate;
    let report = format!(
        "{}: {} slots, mean T_total {} s (stderr {}), mean rho {}, failure rate {:.4}{}\n",
        s.algorithm,
        result.records.len(),
        output::fmt_sig(sum.mean_latency),
        output::fmt_sig(sum.stderr_latency),
        output::fmt_sig(sum.mean_rho),
        sum.failure_rate(),
        if ok { "" } else { " exceeds sim.max_failure_rate" }
    );
    w.finish(ok, report)
}

pub fn sweep_command(config: &RunConfig, axis: SweepAxis, values: &[f64], algorithms: &[Algorithm], out: &Path) -> Result<Outcome> {
    let rows: Vec<SweepRow> = run_sweep(&config.scenario, axis, values, algorithms)?;
    let mut w = Writer::new(out, "sweep", config)?;
    let table = output::sweep_csv(&rows);
    w.write(&format!("sweep_{}.csv", axis.label()), table.as_bytes())?;
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| r.summary.failure_rate() > config.max_failure_rate)
        .map(|r| format!("{}={} {}", axis, r.value, r.algorithm))
        .collect();
    let mut report = table;
    if !bad.is_empty() {
        let _ = writeln!(report, "failure rate above sim.max_failure_rate: {}", bad.join(", "));
    }
    w.finish(bad.is_empty(), report)
}

/// Analog learning curve of trial 0 over the configured number of frames,
/// and the penalty solver traces of the three links on the first slot.
pub fn convergence_command(config: &RunConfig, samples: usize, out: &Path) -> Result<Outcome> {
    let s = &config.scenario;
    let curve = ssca_learning(s, 0, s.frames, samples)?;
    let mut sols = Vec::new();
    for link in 0..3 {
        sols.push(pcccp_convergence(s, 0, link)?);
    }
    let mut w = Writer::new(out, "convergence", config)?;
    w.write("ssca_trace.csv", output::ssca_trace_csv(&curve.sampled, curve.initial, curve.last).as_bytes())?;
    let traces: Vec<(usize, &[_], &[[f64; 4]])> = sols
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.trace.as_slice(), s.block_objectives.as_slice()))
        .collect();
    w.write("pcccp_trace.csv", output::pcccp_trace_csv(&traces).as_bytes())?;
    let mut report = format!(
        "analog: Monte-Carlo weighted capacity {} -> {} over {} updates\n",
        output::fmt_sig(curve.initial),
        output::fmt_sig(curve.last),
        curve.sampled.len()
    );
    for (i, sol) in sols.iter().enumerate() {
        let _ = writeln!(
            report,
            "link {}: {:?}, {} inner iterations, terminal penalty {}",
            i + 1,
            sol.status,
            sol.trace.len(),
            output::fmt_sig(sol.penalty)
        );
    }
    let ok = sols.iter().all(|s| s.converged());
    w.finish(ok, report)
}

pub fn format_checks(outcomes: &[CheckOutcome]) -> String {
    let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for o in outcomes {
        let _ = writeln!(s, "{}  {:width$}  {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let _ = writeln!(s, "{} of {} checks passed", outcomes.len() - failed, outcomes.len());
    s
}

pub fn oracle_check_command(seed: u64, effort: Effort) -> Outcome {
    let outcomes = run_checks(seed, effort);
    Outcome {
        success: outcomes.iter().all(|o| o.passed),
        report: format_checks(&outcomes),
        outputs: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RunConfig {
        let mut c = RunConfig::desk_scale();
        let s = &mut c.scenario;
        s.trials = 2;
        s.frames = 2;
        s.slots = 2;
        s.algorithm = Algorithm::Heuristic;
        c
    }

    #[test]
    fn format_marks_failures() {
        let t = format_checks(&[
            CheckOutcome { name: "a", passed: true, detail: "ok".into() },
            CheckOutcome { name: "long", passed: false, detail: "bad".into() },
        ]);
        assert_eq!(t, "PASS  a     ok\nFAIL  long  bad\n1 of 2 checks passed\n");
    }

    #[test]
    fn run_writes_records_and_manifest() {
        let dir = std::env::temp_dir().join(format!("mmw-mec-run-{}", std::process::id()));
        let o = run_command(&tiny(), &dir, Format::Csv).unwrap();
        assert!(o.success);
        let recs = output::parse_csv(&fs::read(dir.join("records.csv")).unwrap()).unwrap();
        assert_eq!(recs.len(), 2 * 2 * 2);
        assert_eq!(recs.last().unwrap().superframe, 1);
        let m: RunManifest = serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m.outputs.len(), 3);
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn sweep_row_count() {
        let dir = std::env::temp_dir().join(format!("mmw-mec-sweep-{}", std::process::id()));
        let algs = [Algorithm::Heuristic, Algorithm::BinaryOffload];
        let o = sweep_command(&tiny(), SweepAxis::PUa, &[0.01, 0.02, 0.05, 0.1, 0.2], &algs, &dir).unwrap();
        let table = fs::read_to_string(dir.join("sweep_p_ua.csv")).unwrap();
        assert_eq!(table.lines().count(), 1 + 5 * 2);
        assert!(o.success);
        fs::remove_dir_all(dir).unwrap();
    }
}
