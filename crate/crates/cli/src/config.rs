//! Flat `key: value` configuration text.
//!
//! Keys live in the `scenario.`, `sim.`, `ssca.` and `pcccp.` namespaces. A
//! key without a namespace is accepted when exactly one namespace defines it.
//! Lines starting with `#` and blank lines are ignored. Power values accept a
//! `dBm` suffix; everything else is in SI units.

use std::fmt::Write as _;
use std::path::Path;

use mmw_mec::harness::{Algorithm, ScenarioConfig};
use mmw_mec::ssca::StepSchedule;
use mmw_mec::system::{db_to_linear, DbScale};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key: value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key(s): {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// A scenario plus the run-level settings that are not part of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    /// Largest tolerated share of failed or non-converged slots before a run
    /// reports failure.
    pub max_failure_rate: f64,
}

impl RunConfig {
    pub fn reference() -> Self {
        Self {
            scenario: ScenarioConfig::reference(),
            max_failure_rate: 0.1,
        }
    }

    pub fn desk_scale() -> Self {
        Self {
            scenario: ScenarioConfig::desk_scale(),
            ..Self::reference()
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = self.scenario.violations();
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            v.push(format!("sim.max_failure_rate must be in [0, 1], got {}", self.max_failure_rate));
        }
        v
    }
}

pub const KEYS: [&str; 48] = [
    "scenario.n_bs_antennas",
    "scenario.n_a_antennas",
    "scenario.n_b_antennas",
    "scenario.n_rf",
    "scenario.n_rfa",
    "scenario.n_rfb",
    "scenario.streams",
    "scenario.bs_position",
    "scenario.user_a_position",
    "scenario.user_b_position",
    "scenario.path_loss_exponents",
    "scenario.c0_db",
    "scenario.d0",
    "scenario.p_max",
    "scenario.p_ua",
    "scenario.p_bs",
    "scenario.bandwidth",
    "scenario.noise",
    "scenario.task_bits",
    "scenario.compression",
    "scenario.f_local",
    "scenario.f_edge",
    "scenario.num_paths",
    "scenario.los_variance",
    "scenario.nlos_variance",
    "scenario.rician",
    "scenario.doppler_hz",
    "scenario.csi_delay",
    "scenario.slot_duration",
    "scenario.csi_bits",
    "scenario.phase_bits",
    "sim.superframes",
    "sim.frames",
    "sim.slots",
    "sim.algorithm",
    "sim.trials",
    "sim.seed",
    "sim.max_failure_rate",
    "ssca.schedule",
    "ssca.eps_param",
    "ssca.gamma_param",
    "ssca.prox_weight",
    "pcccp.rho0",
    "pcccp.shrink",
    "pcccp.tol_objective",
    "pcccp.tol_penalty",
    "pcccp.max_inner",
    "pcccp.max_outer",
];

fn all_keys() -> impl Iterator<Item = &'static str> {
    KEYS.into_iter()
}

fn resolve(key: &str) -> Option<&'static str> {
    if key.contains('.') {
        return all_keys().find(|k| *k == key);
    }
    let mut hits = all_keys().filter(|k| k.split_once('.').is_some_and(|(_, tail)| tail == key));
    match (hits.next(), hits.next()) {
        (Some(k), None) => Some(k),
        _ => None,
    }
}

/// Formats a float so that parsing the text gives the same value back.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-3..1e7).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", ")
}

/// Canonical text of `config`: every key, fixed order, one per line.
pub fn to_text(config: &RunConfig) -> String {
    let s = &config.scenario;
    let d = &s.dims;
    let g = &s.geometry;
    let (kind, p1, p2) = match s.ssca.schedule {
        StepSchedule::Polynomial { a, b } => ("polynomial", a, b),
        StepSchedule::Geometric { eps_base, gamma_base } => ("geometric", eps_base, gamma_base),
    };
    let values: Vec<String> = vec![
        d.n_bs.to_string(),
        d.n_a.to_string(),
        d.n_b.to_string(),
        d.n_rf.to_string(),
        d.n_rfa.to_string(),
        d.n_rfb.to_string(),
        format!("{}, {}, {}", d.d1, d.d2, d.d3),
        fmt_list(&g.bs),
        fmt_list(&g.user_a),
        fmt_list(&g.user_b),
        fmt_list(&g.beta),
        fmt_f64(g.c0_db),
        fmt_f64(g.d0),
        fmt_f64(s.pa.p_max),
        fmt_f64(s.p_ua),
        fmt_f64(s.p_bs),
        fmt_list(&s.links.map(|l| l.bandwidth)),
        fmt_list(&s.links.map(|l| l.noise)),
        fmt_f64(s.compute.task_bits),
        fmt_f64(s.compute.compression),
        fmt_f64(s.compute.f_local),
        fmt_f64(s.compute.f_edge),
        s.paths.num_paths.to_string(),
        fmt_f64(s.paths.los_variance),
        fmt_f64(s.paths.nlos_variance),
        s.paths.rician.map_or("none".into(), fmt_f64),
        fmt_f64(s.doppler_hz),
        fmt_f64(s.csi_delay),
        fmt_f64(s.slot_duration),
        s.csi_bits.to_string(),
        s.phase_bits.map_or("none".into(), |b| b.to_string()),
        s.superframes.to_string(),
        s.frames.to_string(),
        s.slots.to_string(),
        s.algorithm.label().to_string(),
        s.trials.to_string(),
        s.seed.to_string(),
        fmt_f64(config.max_failure_rate),
        kind.to_string(),
        fmt_f64(p1),
        fmt_f64(p2),
        fmt_f64(s.ssca.prox_weight),
        fmt_f64(s.pcccp.rho0),
        fmt_f64(s.pcccp.shrink),
        fmt_f64(s.pcccp.tol_objective),
        fmt_f64(s.pcccp.tol_penalty),
        s.pcccp.max_inner.to_string(),
        s.pcccp.max_outer.to_string(),
    ];
    let mut out = String::new();
    for (k, v) in all_keys().zip(values) {
        let _ = writeln!(out, "{k}: {v}");
    }
    out
}

struct Parser {
    problems: Vec<String>,
}

impl Parser {
    fn f64(&mut self, key: &str, v: &str) -> Option<f64> {
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Some(x),
            _ => {
                self.problems.push(format!("{key}: expected a finite number, got `{v}`"));
                None
            }
        }
    }

    fn power(&mut self, key: &str, v: &str) -> Option<f64> {
        match v.strip_suffix("dBm") {
            Some(num) => {
                let x = self.f64(key, num.trim())?;
                db_to_linear(x, DbScale::Milliwatt).ok()
            }
            None => self.f64(key, v),
        }
    }

    fn count(&mut self, key: &str, v: &str) -> Option<u64> {
        match v.parse::<i128>() {
            Ok(n) if n < 0 => {
                self.problems.push(format!("{key} must be non-negative, got {n}"));
                None
            }
            Ok(n) => match u64::try_from(n) {
                Ok(n) => Some(n),
                Err(_) => {
                    self.problems.push(format!("{key} is out of range: {n}"));
                    None
                }
            },
            Err(_) => {
                self.problems.push(format!("{key}: expected an integer, got `{v}`"));
                None
            }
        }
    }

    fn usize(&mut self, key: &str, v: &str) -> Option<usize> {
        let n = self.count(key, v)?;
        match usize::try_from(n) {
            Ok(n) => Some(n),
            Err(_) => {
                self.problems.push(format!("{key} is out of range: {n}"));
                None
            }
        }
    }

    fn u32(&mut self, key: &str, v: &str) -> Option<u32> {
        let n = self.count(key, v)?;
        match u32::try_from(n) {
            Ok(n) => Some(n),
            Err(_) => {
                self.problems.push(format!("{key} is out of range: {n}"));
                None
            }
        }
    }

    fn list<const N: usize>(&mut self, key: &str, v: &str, power: bool) -> Option<[f64; N]> {
        let parts: Vec<&str> = v.split(',').map(str::trim).collect();
        if parts.len() != N {
            self.problems.push(format!("{key}: expected {N} comma-separated values, got `{v}`"));
            return None;
        }
        let mut out = [0.0; N];
        for (o, p) in out.iter_mut().zip(parts) {
            *o = if power { self.power(key, p)? } else { self.f64(key, p)? };
        }
        Some(out)
    }
}

/// Parses `text` on top of `base`; omitted keys keep the base values.
pub fn parse_with_base(text: &str, base: RunConfig) -> Result<RunConfig, ConfigError> {
    let mut c = base;
    let mut p = Parser { problems: Vec::new() };
    let mut unknown = Vec::new();
    let mut seen: Vec<&'static str> = Vec::new();
    let (mut kind, (mut p1, mut p2)) = match c.scenario.ssca.schedule {
        StepSchedule::Polynomial { a, b } => ("polynomial", (a, b)),
        StepSchedule::Geometric { eps_base, gamma_base } => ("geometric", (eps_base, gamma_base)),
    };

    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once(':') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        let Some(key) = resolve(k) else {
            unknown.push(k.to_string());
            continue;
        };
        if seen.contains(&key) {
            p.problems.push(format!("{key} given more than once (line {})", i + 1));
            continue;
        }
        seen.push(key);

        let s = &mut c.scenario;
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(x) = $value {
                    $field = x;
                }
            };
        }
        match key {
            "scenario.n_bs_antennas" => set!(s.dims.n_bs, p.usize(key, v)),
            "scenario.n_a_antennas" => set!(s.dims.n_a, p.usize(key, v)),
            "scenario.n_b_antennas" => set!(s.dims.n_b, p.usize(key, v)),
            "scenario.n_rf" => set!(s.dims.n_rf, p.usize(key, v)),
            "scenario.n_rfa" => set!(s.dims.n_rfa, p.usize(key, v)),
            "scenario.n_rfb" => set!(s.dims.n_rfb, p.usize(key, v)),
            "scenario.streams" => {
                let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                if parts.len() == 3 {
                    let d: Vec<Option<usize>> = parts.iter().map(|x| p.usize(key, x)).collect();
                    if let [Some(a), Some(b), Some(c3)] = d[..] {
                        (s.dims.d1, s.dims.d2, s.dims.d3) = (a, b, c3);
                    }
                } else {
                    p.problems.push(format!("{key}: expected 3 comma-separated values, got `{v}`"));
                }
            }
            "scenario.bs_position" => set!(s.geometry.bs, p.list(key, v, false)),
            "scenario.user_a_position" => set!(s.geometry.user_a, p.list(key, v, false)),
            "scenario.user_b_position" => set!(s.geometry.user_b, p.list(key, v, false)),
            "scenario.path_loss_exponents" => set!(s.geometry.beta, p.list(key, v, false)),
            "scenario.c0_db" => set!(s.geometry.c0_db, p.f64(key, v)),
            "scenario.d0" => set!(s.geometry.d0, p.f64(key, v)),
            "scenario.p_max" => set!(s.pa.p_max, p.power(key, v)),
            "scenario.p_ua" => set!(s.p_ua, p.power(key, v)),
            "scenario.p_bs" => set!(s.p_bs, p.power(key, v)),
            "scenario.bandwidth" => {
                if let Some(b) = p.list::<3>(key, v, false) {
                    for (l, x) in s.links.iter_mut().zip(b) {
                        l.bandwidth = x;
                    }
                }
            }
            "scenario.noise" => {
                if let Some(b) = p.list::<3>(key, v, true) {
                    for (l, x) in s.links.iter_mut().zip(b) {
                        l.noise = x;
                    }
                }
            }
            "scenario.task_bits" => set!(s.compute.task_bits, p.f64(key, v)),
            "scenario.compression" => set!(s.compute.compression, p.f64(key, v)),
            "scenario.f_local" => set!(s.compute.f_local, p.f64(key, v)),
            "scenario.f_edge" => set!(s.compute.f_edge, p.f64(key, v)),
            "scenario.num_paths" => set!(s.paths.num_paths, p.usize(key, v)),
            "scenario.los_variance" => set!(s.paths.los_variance, p.f64(key, v)),
            "scenario.nlos_variance" => set!(s.paths.nlos_variance, p.f64(key, v)),
            "scenario.rician" => {
                if v == "none" {
                    s.paths.rician = None;
                } else if let Some(x) = p.f64(key, v) {
                    s.paths.rician = Some(x);
                }
            }
            "scenario.doppler_hz" => set!(s.doppler_hz, p.f64(key, v)),
            "scenario.csi_delay" => set!(s.csi_delay, p.f64(key, v)),
            "scenario.slot_duration" => set!(s.slot_duration, p.f64(key, v)),
            "scenario.csi_bits" => set!(s.csi_bits, p.u32(key, v)),
            "scenario.phase_bits" => {
                if v == "none" {
                    s.phase_bits = None;
                } else if let Some(b) = p.u32(key, v) {
                    s.phase_bits = Some(b);
                }
            }
            "sim.superframes" => set!(s.superframes, p.usize(key, v)),
            "sim.frames" => set!(s.frames, p.usize(key, v)),
            "sim.slots" => set!(s.slots, p.usize(key, v)),
            "sim.algorithm" => match v.parse::<Algorithm>() {
                Ok(a) => s.algorithm = a,
                Err(e) => p.problems.push(format!("{key}: {e}")),
            },
            "sim.trials" => set!(s.trials, p.usize(key, v)),
            "sim.seed" => set!(s.seed, p.count(key, v)),
            "sim.max_failure_rate" => set!(c.max_failure_rate, p.f64(key, v)),
            "ssca.schedule" => match v {
                "polynomial" => kind = "polynomial",
                "geometric" => kind = "geometric",
                _ => p.problems.push(format!("{key}: expected polynomial or geometric, got `{v}`")),
            },
            "ssca.eps_param" => set!(p1, p.f64(key, v)),
            "ssca.gamma_param" => set!(p2, p.f64(key, v)),
            "ssca.prox_weight" => set!(s.ssca.prox_weight, p.f64(key, v)),
            "pcccp.rho0" => set!(s.pcccp.rho0, p.f64(key, v)),
            "pcccp.shrink" => set!(s.pcccp.shrink, p.f64(key, v)),
            "pcccp.tol_objective" => set!(s.pcccp.tol_objective, p.f64(key, v)),
            "pcccp.tol_penalty" => set!(s.pcccp.tol_penalty, p.f64(key, v)),
            "pcccp.max_inner" => set!(s.pcccp.max_inner, p.usize(key, v)),
            "pcccp.max_outer" => set!(s.pcccp.max_outer, p.usize(key, v)),
            _ => unreachable!("resolved key {key} has no handler"),
        }
    }

    if !unknown.is_empty() {
        return Err(ConfigError::UnknownKeys(unknown));
    }
    c.scenario.ssca.schedule = if kind == "polynomial" {
        StepSchedule::Polynomial { a: p1, b: p2 }
    } else {
        StepSchedule::Geometric {
            eps_base: p1,
            gamma_base: p2,
        }
    };
    let mut problems = p.problems;
    if problems.is_empty() {
        problems = c.violations();
    }
    if problems.is_empty() {
        Ok(c)
    } else {
        Err(ConfigError::Invalid(problems))
    }
}

/// Parses `text` on top of the full-size reference scenario.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_with_base(text, RunConfig::reference())
}

pub fn read_config(path: &Path, base: RunConfig) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_with_base(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mmw_mec::system::SystemDims;

    #[test]
    fn empty_text_gives_reference() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::reference());
        let s = &c.scenario;
        assert_eq!(s.dims, SystemDims::new(64, 8, 8, 4, 2, 2));
        let p_bs = db_to_linear(40.0, DbScale::Milliwatt).unwrap();
        assert!((s.p_bs - p_bs).abs() < 1e-12);
        assert_eq!(s.compute.task_bits, 1e6);
        assert_eq!(s.compute.compression, 0.01);
        assert_eq!((s.frames, s.slots), (100, 100));
    }

    #[test]
    fn negative_antenna_count_is_a_range_violation() {
        match parse_config("n_bs_antennas: -1") {
            Err(ConfigError::Invalid(v)) => {
                assert_eq!(v.len(), 1);
                assert!(v[0].contains("scenario.n_bs_antennas") && v[0].contains("-1"), "{v:?}");
            }
            other => panic!("expected a range violation, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_listed() {
        let e = parse_config("sim.trials: 3\nscenario.antennas: 4\nfoo: 1\n").unwrap_err();
        match &e {
            ConfigError::UnknownKeys(k) => assert_eq!(k, &["scenario.antennas", "foo"]),
            other => panic!("{other:?}"),
        }
        assert!(e.to_string().contains("scenario.antennas"));
    }

    #[test]
    fn violations_are_aggregated() {
        let e = parse_config("scenario.p_ua: 0\nscenario.compression: 2\nsim.trials: 0\n").unwrap_err();
        let ConfigError::Invalid(v) = e else { panic!() };
        assert!(v.len() >= 3, "{v:?}");
    }

    #[test]
    fn syntax_and_duplicates() {
        assert!(matches!(parse_config("trials 3"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_config("sim.trials: 3\ntrials: 4"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("sim.trials: three"), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn decibel_milliwatt_powers() {
        let c = parse_config("p_ua: 20 dBm\n# comment\n\nscenario.p_bs: 10 # watts\n").unwrap();
        assert!((c.scenario.p_ua - 0.1).abs() < 1e-15);
        assert_eq!(c.scenario.p_bs, 10.0);
    }

    #[test]
    fn canonical_text_round_trips() {
        for base in [RunConfig::reference(), RunConfig::desk_scale()] {
            let text = to_text(&base);
            assert_eq!(parse_config(&text).unwrap(), base);
        }
        let mut c = RunConfig::desk_scale();
        c.scenario.ssca.schedule = StepSchedule::geometric();
        c.scenario.paths.rician = Some(3.5);
        c.scenario.phase_bits = Some(4);
        c.scenario.csi_delay = 1.0 / 3.0;
        c.scenario.algorithm = Algorithm::IdealCsi;
        c.scenario.seed = u64::MAX;
        let text = to_text(&c);
        let back = parse_config(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(to_text(&back), text);
    }

    #[test]
    fn every_key_is_emitted_once() {
        let text = to_text(&RunConfig::reference());
        assert_eq!(text.lines().count(), KEYS.len());
        for k in all_keys() {
            assert!(resolve(k).is_some());
            assert_eq!(text.lines().filter(|l| l.starts_with(&format!("{k}:"))).count(), 1);
        }
    }

    #[test]
    fn float_text_is_exact() {
        for x in [0.0, -0.0, 1e-12, 0.1, 1.0 / 3.0, 123456789.0, -2.5e300, 4e-3] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
