//! Computation and transmission delays of the partial-offloading protocol.
//!
//! User A splits an `L`-bit task: `ρL` bits go up to the BS for edge
//! computation, `(1−ρ)L` bits are computed locally. Results (`α` times the
//! input size) reach user B over the D2D link and the downlink. User A's
//! transmitter serves the uplink before the D2D link, and user B's receiver
//! takes the D2D result before the downlink result, so the two transfers to
//! user B never overlap.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Task and computing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeParams {
    /// Task size (bits).
    pub task_bits: f64,
    /// Result-to-input size ratio in `[0, 1]`.
    pub compression: f64,
    /// Local computing capacity (bits/s).
    pub f_local: f64,
    /// Edge computing capacity (bits/s).
    pub f_edge: f64,
}

impl ComputeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.task_bits > 0.0 && self.task_bits.is_finite()) {
            return Err(invalid("task size must be positive"));
        }
        if !(0.0..=1.0).contains(&self.compression) {
            return Err(invalid("compression ratio must be in [0, 1]"));
        }
        if !(self.f_local > 0.0 && self.f_edge > 0.0) {
            return Err(invalid("computing capacities must be positive"));
        }
        Ok(())
    }
}

/// Full-task delay coefficients (seconds): local and edge computing, uplink,
/// downlink and D2D transfer times of the whole task or its result.
///
/// A zero-rate link yields an infinite coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayCoeffs {
    pub k_local: f64,
    pub k_edge: f64,
    pub k_up: f64,
    pub k_down: f64,
    pub k_d2d: f64,
}

impl DelayCoeffs {
    pub fn new(k_local: f64, k_edge: f64, k_up: f64, k_down: f64, k_d2d: f64) -> Self {
        Self {
            k_local,
            k_edge,
            k_up,
            k_down,
            k_d2d,
        }
    }

    /// True when some link has zero rate.
    pub fn is_degenerate(&self) -> bool {
        !(self.k_up.is_finite() && self.k_down.is_finite() && self.k_d2d.is_finite())
    }

    pub fn is_finite(&self) -> bool {
        [self.k_local, self.k_edge, self.k_up, self.k_down, self.k_d2d]
            .iter()
            .all(|k| k.is_finite())
    }
}

pub fn delay_coeffs(compute: &ComputeParams, rates: [f64; 3]) -> Result<DelayCoeffs> {
    compute.validate()?;
    if rates.iter().any(|r| !(*r >= 0.0)) {
        return Err(invalid(format!("rates must be non-negative, got {rates:?}")));
    }
    let per = |bits: f64, rate: f64| {
        if bits == 0.0 {
            0.0
        } else if rate == 0.0 {
            f64::INFINITY
        } else {
            bits / rate
        }
    };
    let l = compute.task_bits;
    let result_bits = compute.compression * l;
    Ok(DelayCoeffs {
        k_local: l / compute.f_local,
        k_edge: l / compute.f_edge,
        k_up: per(l, rates[0]),
        k_down: per(result_bits, rates[1]),
        k_d2d: per(result_bits, rates[2]),
    })
}

/// The four timeline cases of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    /// Uplink outlasts local computing; edge computing outlasts the D2D transfer.
    One = 1,
    /// Uplink outlasts local computing; the downlink waits for the D2D transfer.
    Two = 2,
    /// Local computing outlasts the uplink; the downlink waits for the D2D transfer.
    Three = 3,
    /// Local computing outlasts the uplink; no waiting.
    Four = 4,
}

impl Case {
    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Case::One),
            2 => Some(Case::Two),
            3 => Some(Case::Three),
            4 => Some(Case::Four),
            _ => None,
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyBreakdown {
    pub local_compute: f64,
    pub edge_compute: f64,
    pub uplink: f64,
    pub downlink: f64,
    pub d2d: f64,
    pub total: f64,
    pub case: Case,
}

fn portion(frac: f64, k: f64) -> f64 {
    if frac == 0.0 {
        0.0
    } else {
        frac * k
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(invalid(format!("offloading ratio {rho} outside [0, 1]")));
    }
    Ok(())
}

struct Parts {
    local: f64,
    edge: f64,
    up: f64,
    down: f64,
    d2d: f64,
}

fn parts(rho: f64, k: &DelayCoeffs) -> Parts {
    Parts {
        local: portion(1.0 - rho, k.k_local),
        edge: portion(rho, k.k_edge),
        up: portion(rho, k.k_up),
        down: portion(rho, k.k_down),
        d2d: portion(1.0 - rho, k.k_d2d),
    }
}

/// Closed-form end-to-end latency for offloading ratio `rho`.
pub fn total_latency(rho: f64, k: &DelayCoeffs) -> Result<LatencyBreakdown> {
    check_rho(rho)?;
    let p = parts(rho, k);
    let (total, case) = if p.up >= p.local {
        let case = if p.edge >= p.d2d { Case::One } else { Case::Two };
        (p.up + p.edge.max(p.d2d) + p.down, case)
    } else {
        let case = if p.up + p.edge < p.local + p.d2d {
            Case::Three
        } else {
            Case::Four
        };
        ((p.up + p.edge).max(p.d2d + p.local) + p.down, case)
    };
    Ok(LatencyBreakdown {
        local_compute: p.local,
        edge_compute: p.edge,
        uplink: p.up,
        downlink: p.down,
        d2d: p.d2d,
        total,
        case,
    })
}

/// Protocol stages tracked by the timeline simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Uplink,
    LocalCompute,
    EdgeCompute,
    D2d,
    Downlink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Start,
    Finish,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineEvent {
    pub time: f64,
    pub stage: Stage,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub breakdown: LatencyBreakdown,
    /// Start and finish of every stage that carries a non-zero workload, in time order.
    pub events: Vec<TimelineEvent>,
}

impl Timeline {
    pub fn event(&self, stage: Stage, kind: EventKind) -> Option<f64> {
        self.events
            .iter()
            .find(|e| e.stage == stage && e.kind == kind)
            .map(|e| e.time)
    }
}

const STAGES: usize = 5;

fn idx(s: Stage) -> usize {
    match s {
        Stage::Uplink => 0,
        Stage::LocalCompute => 1,
        Stage::EdgeCompute => 2,
        Stage::D2d => 3,
        Stage::Downlink => 4,
    }
}

const STAGE_ORDER: [Stage; STAGES] = [
    Stage::Uplink,
    Stage::LocalCompute,
    Stage::EdgeCompute,
    Stage::D2d,
    Stage::Downlink,
];

struct Sim<'a> {
    duration: [f64; STAGES],
    pending: [Option<f64>; STAGES],
    finished: [Option<f64>; STAGES],
    started: [bool; STAGES],
    log: Option<&'a mut Vec<TimelineEvent>>,
}

impl Sim<'_> {
    fn record(&mut self, i: usize, time: f64, kind: EventKind) {
        if self.duration[i] > 0.0 {
            if let Some(l) = self.log.as_deref_mut() {
                l.push(TimelineEvent {
                    time,
                    stage: STAGE_ORDER[i],
                    kind,
                });
            }
        }
    }

    fn start(&mut self, s: Stage, now: f64) {
        let i = idx(s);
        self.started[i] = true;
        self.record(i, now, EventKind::Start);
        self.pending[i] = Some(now + self.duration[i]);
    }

    fn done(&self, s: Stage) -> bool {
        self.finished[idx(s)].is_some()
    }

    fn finish_time(&self, s: Stage) -> f64 {
        self.finished[idx(s)].unwrap_or(0.0)
    }
}

/// Discrete-event run of the protocol. Pending finish events live in a
/// fixed-size table; the earliest one fires next.
fn simulate(rho: f64, k: &DelayCoeffs, log: Option<&mut Vec<TimelineEvent>>) -> LatencyBreakdown {
    let p = parts(rho, k);
    let mut sim = Sim {
        duration: [p.up, p.local, p.edge, p.d2d, p.down],
        pending: [None; STAGES],
        finished: [None; STAGES],
        started: [false; STAGES],
        log,
    };

    // user A starts transmitting raw data and computing locally at once
    sim.start(Stage::Uplink, 0.0);
    sim.start(Stage::LocalCompute, 0.0);

    loop {
        let next = (0..STAGES)
            .filter_map(|i| sim.pending[i].map(|t| (t, i)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let Some((now, i)) = next else { break };
        sim.pending[i] = None;
        sim.finished[i] = Some(now);
        sim.record(i, now, EventKind::Finish);

        if STAGE_ORDER[i] == Stage::Uplink {
            sim.start(Stage::EdgeCompute, now);
        }
        // user A's transmitter serves the D2D result only after the uplink is free
        if !sim.started[idx(Stage::D2d)] && sim.done(Stage::LocalCompute) && sim.done(Stage::Uplink) {
            sim.start(Stage::D2d, now);
        }
        // user B takes the edge result only after the D2D transfer is over
        if !sim.started[idx(Stage::Downlink)] && sim.done(Stage::EdgeCompute) && sim.done(Stage::D2d) {
            sim.start(Stage::Downlink, now);
        }
    }

    let at = |s: Stage| sim.finish_time(s);
    let total = at(Stage::Downlink).max(at(Stage::D2d));
    let case = match (
        at(Stage::Uplink) >= at(Stage::LocalCompute),
        at(Stage::EdgeCompute) >= at(Stage::D2d),
    ) {
        (true, true) => Case::One,
        (true, false) => Case::Two,
        (false, false) => Case::Three,
        (false, true) => Case::Four,
    };
    LatencyBreakdown {
        local_compute: p.local,
        edge_compute: p.edge,
        uplink: p.up,
        downlink: p.down,
        d2d: p.d2d,
        total,
        case,
    }
}

/// Event-driven simulation of the protocol, with the full event log.
pub fn timeline_oracle(rho: f64, k: &DelayCoeffs) -> Result<Timeline> {
    check_rho(rho)?;
    let mut events = Vec::with_capacity(2 * STAGES);
    let breakdown = simulate(rho, k, Some(&mut events));
    Ok(Timeline { breakdown, events })
}

/// Timeline completion time without the event log.
pub fn timeline_latency(rho: f64, k: &DelayCoeffs) -> Result<LatencyBreakdown> {
    check_rho(rho)?;
    Ok(simulate(rho, k, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_k() -> DelayCoeffs {
        DelayCoeffs::new(5.0, 1.0, 2.0, 0.5, 3.0)
    }

    #[test]
    fn coefficient_examples() {
        let cp = ComputeParams {
            task_bits: 1e6,
            compression: 0.01,
            f_local: 2e8,
            f_edge: 1.6e9,
        };
        let k = delay_coeffs(&cp, [1e9, 2e9, 5e8]).unwrap();
        assert!((k.k_local - 5e-3).abs() < 1e-18);
        assert!((k.k_edge - 0.625e-3).abs() < 1e-18);
        assert!((k.k_up - 1e-3).abs() < 1e-18);
        assert!((k.k_down - 5e-6).abs() < 1e-20);
        let k0 = delay_coeffs(&ComputeParams { compression: 0.0, ..cp }, [1e9, 0.0, 0.0]).unwrap();
        assert_eq!((k0.k_down, k0.k_d2d), (0.0, 0.0));
        let kz = delay_coeffs(&cp, [0.0, 1.0, 1.0]).unwrap();
        assert!(kz.is_degenerate());
        assert!(delay_coeffs(&cp, [-1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn boundary_ratios() {
        let k = sample_k();
        let t0 = total_latency(0.0, &k).unwrap();
        assert_eq!(t0.total, k.k_local + k.k_d2d);
        let t1 = total_latency(1.0, &k).unwrap();
        assert_eq!(t1.total, k.k_up + k.k_edge + k.k_down);
        assert!(total_latency(1.5, &k).is_err());
        assert!(timeline_oracle(-0.1, &k).is_err());
    }

    #[test]
    fn half_offload_example() {
        let k = sample_k();
        assert!((total_latency(0.5, &k).unwrap().total - 4.25).abs() < 1e-15);
        assert!((timeline_oracle(0.5, &k).unwrap().breakdown.total - 4.25).abs() < 1e-15);
    }

    #[test]
    fn local_only_fires_local_and_d2d_events() {
        let tl = timeline_oracle(0.0, &sample_k()).unwrap();
        assert!(tl.events.iter().all(|e| matches!(e.stage, Stage::LocalCompute | Stage::D2d)));
        assert_eq!(tl.events.len(), 4);
    }

    #[test]
    fn downlink_waits_for_d2d_in_case_two() {
        // ρK1 ≥ (1−ρ)K_L and ρK_E < (1−ρ)K3
        let k = DelayCoeffs::new(1.0, 0.2, 3.0, 0.5, 4.0);
        let tl = timeline_oracle(0.5, &k).unwrap();
        assert_eq!(tl.breakdown.case, Case::Two);
        let down_start = tl.event(Stage::Downlink, EventKind::Start).unwrap();
        let d2d_end = tl.event(Stage::D2d, EventKind::Finish).unwrap();
        assert_eq!(down_start, d2d_end);
        assert_eq!(total_latency(0.5, &k).unwrap().case, Case::Two);
    }

    #[test]
    fn closed_form_matches_timeline() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut seen = [false; 4];
        for _ in 0..10_000 {
            let k = DelayCoeffs::new(
                rng.random_range(0.01..10.0),
                rng.random_range(0.01..10.0),
                rng.random_range(0.01..10.0),
                rng.random_range(0.01..10.0),
                rng.random_range(0.01..10.0),
            );
            let rho: f64 = rng.random_range(0.0..=1.0);
            let a = total_latency(rho, &k).unwrap();
            let b = timeline_latency(rho, &k).unwrap();
            assert!((a.total - b.total).abs() <= 1e-12 * a.total.abs());
            assert_eq!(a.case, b.case);
            seen[a.case as usize - 1] = true;
        }
        assert_eq!(seen, [true; 4]);
    }

    #[test]
    fn latency_is_continuous_piecewise_linear() {
        let k = sample_k();
        let n = 100_000;
        let h = 1.0 / n as f64;
        let t: Vec<f64> = (0..=n).map(|i| total_latency(i as f64 * h, &k).unwrap().total).collect();
        let mut kinks = 0;
        for i in 1..n {
            let second = (t[i + 1] - 2.0 * t[i] + t[i - 1]).abs();
            if second > 1e-9 {
                kinks += 1;
            }
        }
        // each breakpoint shows up in at most two neighbouring stencils
        assert!(kinks <= 6, "{kinks}");
        let max_jump = t.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(max_jump < 20.0 * h);
    }

    #[test]
    fn case_numbers_round_trip() {
        for n in 1..=4u8 {
            assert_eq!(Case::from_number(n).unwrap().number(), n);
        }
        assert!(Case::from_number(0).is_none());
    }
}
