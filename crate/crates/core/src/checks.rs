//! Self-checks of the closed forms against brute-force oracles, plus the
//! Monte-Carlo learning and trend checks. Each returns a pass/fail outcome
//! with a one-line detail.

use std::f64::consts::{LN_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{effective_channel, ChannelTriple};
use crate::error::Result;
use crate::harness::{
    csi_overhead, run, run_sweep, spearman, ssca_learning, superframe_channels, Algorithm, CsiScheme, ScenarioConfig,
    SweepAxis, SweepRow,
};
use crate::latency::{timeline_latency, total_latency, DelayCoeffs};
use crate::linalg::{identity, random_gaussian};
use crate::offload::{brute_force_rho, optimal_rho};
use crate::pa::{h_of_vout, pa_power};
use crate::pcccp::{constraint_excess, pcccp_solve, wmmse_rate_nats, LinkRole, PcccpConfig};
use crate::rate::{link_rate, LinkParams};
use crate::ssca::{capacity_gradients, weighted_capacity, AnalogSet, StepSchedule, Weights};
use crate::system::{RngStream, SystemDims};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    fn from_result(name: &'static str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

fn random_coeffs(rng: &mut ChaCha8Rng) -> DelayCoeffs {
    let mut draw = || 10f64.powf(rng.random_range(-2.0..1.0));
    DelayCoeffs::new(draw(), draw(), draw(), draw(), draw())
}

/// Closed-form latency against the event-driven timeline on `n` random tuples.
pub fn latency_vs_timeline(seed: u64, n: usize) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut mismatched = 0;
        let mut seen = [false; 4];
        for _ in 0..n {
            let k = random_coeffs(&mut rng);
            let rho = rng.random_range(0.0..=1.0);
            let a = total_latency(rho, &k)?;
            let b = timeline_latency(rho, &k)?;
            worst = worst.max((a.total - b.total).abs() / b.total);
            if a.case != b.case {
                mismatched += 1;
            }
            seen[a.case.number() as usize - 1] = true;
        }
        let passed = worst <= 1e-12 && mismatched == 0 && seen.iter().all(|&s| s);
        Ok((
            passed,
            format!("{n} tuples, max rel err {worst:.1e}, case mismatches {mismatched}, cases seen {seen:?}"),
        ))
    };
    CheckOutcome::from_result("latency-vs-timeline", run())
}

/// Closed-form offloading ratio against a grid search with step `step`.
pub fn offload_vs_grid(seed: u64, n: usize, step: f64) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut worst_rho, mut worst_t): (f64, f64) = (0.0, 0.0);
        let mut dominance_failures = 0;
        for _ in 0..n {
            let k = random_coeffs(&mut rng);
            let s = optimal_rho(&k)?;
            let g = brute_force_rho(&k, step)?;
            worst_rho = worst_rho.max((s.rho - g.rho).abs());
            worst_t = worst_t.max((s.total_latency - g.total_latency).abs() / g.total_latency);
            let ends = total_latency(0.0, &k)?.total.min(total_latency(1.0, &k)?.total);
            if s.total_latency > ends {
                dominance_failures += 1;
            }
        }
        let passed = worst_rho <= step && worst_t <= 1e-4 && dominance_failures == 0;
        Ok((
            passed,
            format!("{n} tuples, max |Δρ| {worst_rho:.1e}, max rel ΔT {worst_t:.1e}, dominance failures {dominance_failures}"),
        ))
    };
    CheckOutcome::from_result("offload-vs-grid", run())
}

/// Continuity at the kink, amplitude/power agreement and the full-output value.
pub fn pa_identities(seed: u64, n: usize) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut continuity = true;
        let mut worst: f64 = 0.0;
        let mut worst_end: f64 = 0.0;
        for _ in 0..n {
            let pm: f64 = rng.random_range(0.01..10.0);
            let kink = 0.25 * pm;
            let right = pm / PI + 6.0 * ((kink * pm).sqrt() - 0.5 * pm) / PI;
            continuity &= pa_power(kink, pm)? == 2.0 * (kink * pm).sqrt() / PI && pa_power(kink, pm)? == right;
            let v = rng.random_range(0.0..=pm.sqrt());
            worst = worst.max((h_of_vout(v, pm)? - pa_power(v * v, pm)?).abs() / pm.max(1.0));
            worst_end = worst_end.max((pa_power(pm, pm)? - 4.0 * pm / PI).abs() / pm);
        }
        let passed = continuity && worst <= 1e-14 && worst_end <= 1e-15;
        Ok((
            passed,
            format!("exact continuity {continuity}, max |h(v) − P(v²)| {worst:.1e}, max endpoint err {worst_end:.1e}"),
        ))
    };
    CheckOutcome::from_result("pa-identities", run())
}

fn random_channels(rng: &mut ChaCha8Rng, d: &SystemDims) -> ChannelTriple {
    ChannelTriple {
        h1: random_gaussian(rng, d.n_bs, d.n_a, 1.0),
        h2: random_gaussian(rng, d.n_b, d.n_bs, 1.0),
        h3: random_gaussian(rng, d.n_b, d.n_a, 1.0),
        path_loss: [1.0; 3],
    }
}

/// Largest deviation of the analytic phase gradient from central differences
/// with the given step, relative to the largest gradient entry.
pub fn gradient_error(seed: u64, step: f64) -> Result<f64> {
    let d = SystemDims::new(4, 2, 2, 2, 2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = AnalogSet::random(&mut rng, &d);
    let ch = random_channels(&mut rng, &d);
    let w = Weights::new([0.5, 0.2, 0.3])?;
    let noise = [0.3, 0.4, 0.5];
    let grads = capacity_gradients(&a, &ch, &w, noise)?;
    let mut numeric = AnalogSet::zeros(&d);
    for b in 0..4 {
        for idx in 0..grads.blocks()[b].len() {
            let mut plus = a.clone();
            let mut minus = a.clone();
            plus.blocks_mut()[b][idx] += step;
            minus.blocks_mut()[b][idx] -= step;
            let gp = weighted_capacity(&plus, &ch, &w, noise)?;
            let gm = weighted_capacity(&minus, &ch, &w, noise)?;
            numeric.blocks_mut()[b][idx] = (gp - gm) / (2.0 * step);
        }
    }
    Ok(grads.combine(1.0, &numeric, -1.0)?.max_abs() / numeric.max_abs())
}

pub fn capacity_gradients_check(seeds: &[u64]) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let errs = seeds.iter().map(|&s| gradient_error(s, 1e-6)).collect::<Result<Vec<f64>>>()?;
        let worst = errs.iter().cloned().fold(0.0, f64::max);
        Ok((worst < 1e-5, format!("seeds {seeds:?}, max rel err {worst:.1e}")))
    };
    CheckOutcome::from_result("capacity-gradients", run())
}

/// Per-instance result of the penalty-CCCP convergence check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcccpInstanceReport {
    /// Largest relative block-update increase of the penalized objective.
    pub worst_increase: f64,
    /// Largest terminal penalty over the three links.
    pub penalty: f64,
    /// Largest constraint excess of the unscaled solver output.
    pub excess: f64,
}

/// Solves the three links of one random desk-scale slot with block tracking.
pub fn pcccp_instance(config: &ScenarioConfig, index: usize) -> Result<PcccpInstanceReport> {
    let mut process = superframe_channels(config, index, 0)?;
    let mut rng = RngStream::derive(config.seed, &[index as u64, 0xb10c]).rng();
    process.redraw_gains(&mut rng);
    let ch = process.channels()?;
    let analog = AnalogSet::random(&mut rng, &config.dims).matrices();
    let d = &config.dims;
    let links = [
        (&analog.bs_rx, &ch.h1, &analog.user_a, config.p_ua, d.d1),
        (&analog.user_b, &ch.h2, &analog.bs_tx, config.p_bs, d.d2),
        (&analog.user_b, &ch.h3, &analog.user_a, config.p_ua, d.d3),
    ];
    let cfg = PcccpConfig {
        track_blocks: true,
        ..config.pcccp
    };
    let mut report = PcccpInstanceReport {
        worst_increase: 0.0,
        penalty: 0.0,
        excess: 0.0,
    };
    for (k, (rx, h, tx, budget, streams)) in links.into_iter().enumerate() {
        let role = LinkRole {
            tx_analog: tx,
            rx_analog: rx,
            noise: config.links[k].noise,
            budget,
            p_max: config.pa.p_max,
            streams,
        };
        let sol = pcccp_solve(&role, &effective_channel(rx, h, tx)?, &cfg, None)?;
        for b in &sol.block_objectives {
            for i in 0..3 {
                report.worst_increase = report.worst_increase.max((b[i + 1] - b[i]) / b[i].abs().max(1.0));
            }
        }
        report.penalty = report.penalty.max(sol.penalty);
        let (total, per_pa) = constraint_excess(tx, &sol.raw_w, budget, config.pa.p_max);
        report.excess = report.excess.max(total).max(per_pa);
    }
    Ok(report)
}

pub fn pcccp_convergence_check(config: &ScenarioConfig, instances: usize) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let tol = config.pcccp.tol_penalty;
        let mut worst_increase: f64 = 0.0;
        let mut small_penalty = 0;
        let mut worst_excess: f64 = 0.0;
        for i in 0..instances {
            let r = pcccp_instance(config, i)?;
            worst_increase = worst_increase.max(r.worst_increase);
            if r.penalty < tol {
                small_penalty += 1;
            }
            worst_excess = worst_excess.max(r.excess);
        }
        let passed = worst_increase <= 1e-9
            && small_penalty as f64 >= 0.95 * instances as f64
            && worst_excess <= 10.0 * tol.sqrt();
        Ok((
            passed,
            format!(
                "{instances} instances, max block increase {worst_increase:.1e}, penalty < {tol:e} in {small_penalty}, max excess {worst_excess:.1e}"
            ),
        ))
    };
    CheckOutcome::from_result("pcccp-convergence", run())
}

/// Weighted-MSE objective at the MMSE receiver reproduces the log-det rate.
pub fn wmmse_equivalence_check(seed: u64, n: usize) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let rx = random_gaussian(&mut rng, 5, 2, 1.0);
            let h = random_gaussian(&mut rng, 5, 3, 1.0);
            let w = random_gaussian(&mut rng, 3, 2, 1.0);
            let noise = rng.random_range(0.05..2.0);
            let h_ef = rx.adjoint() * &h;
            let nats = wmmse_rate_nats(&h_ef, &w, &rx, noise)?;
            let rate = link_rate(&rx, &h, &identity(3), &w, &LinkParams::new(1.0, noise)?)? * LN_2;
            worst = worst.max((nats - rate).abs());
        }
        Ok((worst <= 1e-9, format!("{n} instances, max |Δ| {worst:.1e} nats")))
    };
    CheckOutcome::from_result("wmmse-equivalence", run())
}

/// Trials out of `trials` whose Monte-Carlo capacity improves after `frames` updates.
pub fn ssca_wins(config: &ScenarioConfig, schedule: StepSchedule, trials: usize, frames: usize) -> Result<usize> {
    let mut c = config.clone();
    c.ssca.schedule = schedule;
    let mut wins = 0;
    for t in 0..trials {
        let l = ssca_learning(&c, t, frames, 200)?;
        if l.last > l.initial {
            wins += 1;
        }
    }
    Ok(wins)
}

pub fn ssca_learning_check(config: &ScenarioConfig) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let poly = ssca_wins(config, StepSchedule::default(), 20, 100)?;
        let geo = ssca_wins(config, StepSchedule::geometric(), 20, 100)?;
        Ok((
            poly >= 19 && geo >= 19,
            format!("improved in {poly}/20 (polynomial) and {geo}/20 (geometric) trials"),
        ))
    };
    CheckOutcome::from_result("ssca-learning", run())
}

pub fn csi_overhead_check() -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let d = SystemDims::reference();
        let two = csi_overhead(&d, 100, 1, CsiScheme::TwoTimescale)?;
        let single = csi_overhead(&d, 100, 1, CsiScheme::SingleTimescale)?;
        Ok((
            two == 1776 && single == 57600,
            format!("two-timescale {two}ζ, single-timescale {single}ζ, ratio {:.1}", single as f64 / two as f64),
        ))
    };
    CheckOutcome::from_result("csi-overhead", run())
}

fn column(rows: &[SweepRow], algorithm: Algorithm, f: impl Fn(&SweepRow) -> f64) -> Vec<f64> {
    rows.iter().filter(|r| r.algorithm == algorithm).map(f).collect()
}

/// Scenario used by the trend checks: `trials` trials of `frames` one-slot frames.
pub fn trend_config(trials: usize, frames: usize, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        frames,
        slots: 1,
        trials,
        seed,
        ..ScenarioConfig::desk_scale()
    }
}

pub const P_UA_VALUES: [f64; 5] = [0.01, 0.02, 0.05, 0.1, 0.2];
pub const D_Y_VALUES: [f64; 6] = [25.0, 50.0, 100.0, 200.0, 400.0, 800.0];
pub const CSI_DELAY_VALUES: [f64; 5] = [0.0, 2e-3, 4e-3, 6e-3, 8e-3];

/// Mean latency falls with user A's budget.
pub fn power_trend(config: &ScenarioConfig) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let rows = run_sweep(config, SweepAxis::PUa, &P_UA_VALUES, &[Algorithm::Pcccp])?;
        let t = column(&rows, Algorithm::Pcccp, |r| r.summary.mean_latency);
        let r = spearman(&P_UA_VALUES, &t)?;
        Ok((r <= -0.9, format!("Spearman {r:.3}, mean T {t:.4?}")))
    };
    CheckOutcome::from_result("trend-power", run())
}

/// Offloading ratio falls toward zero as the users move away.
pub fn distance_trend(config: &ScenarioConfig) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let rows = run_sweep(config, SweepAxis::Dy, &D_Y_VALUES, &[Algorithm::Pcccp])?;
        let rho = column(&rows, Algorithm::Pcccp, |r| r.summary.mean_rho);
        let r = spearman(&D_Y_VALUES, &rho)?;
        let (first, last) = (rho[0], rho[rho.len() - 1]);
        Ok((
            r <= -0.9 && last <= 0.25 * first,
            format!("Spearman {r:.3}, mean ρ {rho:.3?}"),
        ))
    };
    CheckOutcome::from_result("trend-distance", run())
}

/// Five-bit analog phases lose at most 5% latency against continuous phases.
pub fn phase_bits_trend(config: &ScenarioConfig) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let rows = run_sweep(config, SweepAxis::PhaseBits, &[0.0, 5.0], &[Algorithm::Pcccp])?;
        let t = column(&rows, Algorithm::Pcccp, |r| r.summary.mean_latency);
        let rel = (t[1] - t[0]).abs() / t[0];
        Ok((rel < 0.05, format!("unquantized {:.4e}, 5 bits {:.4e}, rel diff {rel:.2e}", t[0], t[1])))
    };
    CheckOutcome::from_result("trend-phase-bits", run())
}

/// Two-timescale latency is insensitive to the CSI delay while per-slot
/// re-optimization on delayed full CSI degrades.
pub fn csi_delay_trend(config: &ScenarioConfig) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let algs = [Algorithm::Pcccp, Algorithm::IdealCsi];
        let rows = run_sweep(config, SweepAxis::CsiDelay, &CSI_DELAY_VALUES, &algs)?;
        let two = column(&rows, Algorithm::Pcccp, |r| r.summary.mean_latency);
        let ideal = column(&rows, Algorithm::IdealCsi, |r| r.summary.mean_latency);
        let lo = two.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = two.iter().cloned().fold(0.0, f64::max);
        let spread = (hi - lo) / lo;
        let r = spearman(&CSI_DELAY_VALUES, &ideal)?;
        let n = ideal.len() - 1;
        let ideal_growth = ideal[n] / ideal[0] - 1.0;
        let two_growth = two[n] / two[0] - 1.0;
        Ok((
            spread < 0.1 && r >= 0.9 && ideal_growth > two_growth,
            format!(
                "two-timescale spread {spread:.2e} (growth {two_growth:.2e}); ideal-csi Spearman {r:.3}, growth {ideal_growth:.2e}"
            ),
        ))
    };
    CheckOutcome::from_result("trend-csi-delay", run())
}

/// Two runs of the same configuration produce identical records.
pub fn determinism_check(config: &ScenarioConfig) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let a = run(config)?;
        let b = run(config)?;
        let same = format!("{:?}", a.records) == format!("{:?}", b.records);
        Ok((same, format!("{} records compared", a.records.len())))
    };
    CheckOutcome::from_result("determinism", run())
}

/// How much of each check to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effort {
    /// Sizes used by the acceptance suite.
    Full,
    /// Reduced sizes for a quick smoke run; the Monte-Carlo trend checks are
    /// left out since their effects are too small to resolve with few trials.
    Quick,
}

/// Every check in order.
pub fn run_checks(seed: u64, effort: Effort) -> Vec<CheckOutcome> {
    let quick = effort == Effort::Quick;
    let desk = ScenarioConfig {
        seed,
        ..ScenarioConfig::desk_scale()
    };
    let mut out = vec![
        latency_vs_timeline(seed, 10_000),
        offload_vs_grid(seed, if quick { 50 } else { 1000 }, 1e-5),
        pa_identities(seed, 1000),
        capacity_gradients_check(&[seed, seed + 1, seed + 2]),
        pcccp_convergence_check(&desk, if quick { 10 } else { 50 }),
        wmmse_equivalence_check(seed, 100),
        ssca_learning_check(&desk),
        csi_overhead_check(),
    ];
    if !quick {
        let trend = trend_config(20, 10, seed);
        out.extend([
            power_trend(&trend),
            distance_trend(&trend),
            phase_bits_trend(&trend),
            csi_delay_trend(&trend),
        ]);
    }
    out.push(determinism_check(&ScenarioConfig {
        frames: 3,
        slots: 2,
        trials: 2,
        ..desk
    }));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_checks_pass() {
        for c in [
            latency_vs_timeline(1, 2000),
            offload_vs_grid(1, 5, 1e-4),
            pa_identities(1, 200),
            capacity_gradients_check(&[7]),
            wmmse_equivalence_check(1, 20),
            csi_overhead_check(),
        ] {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn failing_check_reports_error() {
        let c = CheckOutcome::from_result("x", Err(crate::error::Error::InvalidArgument("boom".into())));
        assert!(!c.passed);
        assert!(c.detail.contains("boom"));
    }
}
