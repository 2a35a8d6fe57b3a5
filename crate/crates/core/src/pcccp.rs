//! Short-term digital precoding under the Doherty PA consumption constraint.
//!
//! The rate of one link is rewritten as a weighted MSE problem. Two auxiliary
//! variables per PA (its consumed power `P_PA` and output amplitude `V_out`)
//! turn the non-linear budget into equalities, which are moved into a
//! quadratic penalty with weight `1/(2ϱ)`. The inner loop is block coordinate
//! descent over `{V, P_PA}`, `{Z, V_out}` and `{W}` (the last one majorized by
//! linearizing the concave `−‖F(i,:)W‖` terms); the outer loop shrinks `ϱ`.

use std::f64::consts::PI;

use nalgebra::{SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::linalg::{c, hermitian_part, identity, inverse_sqrt_hpd, logdet_hpd, solve_hpd_regularized};
use crate::pa::{h_unchecked, pa_power_unchecked};
use crate::system::ComplexMatrix;

/// One link as seen by the digital precoder design.
#[derive(Debug, Clone, Copy)]
pub struct LinkRole<'a> {
    /// Transmit analog matrix; one row per PA.
    pub tx_analog: &'a ComplexMatrix,
    pub rx_analog: &'a ComplexMatrix,
    /// Noise power (watt).
    pub noise: f64,
    /// Budget on the summed PA consumption (watt).
    pub budget: f64,
    /// Maximum output power of one PA (watt).
    pub p_max: f64,
    /// Number of data streams.
    pub streams: usize,
}

impl LinkRole<'_> {
    pub fn num_pas(&self) -> usize {
        self.tx_analog.nrows()
    }

    /// Consumption the solver spends: the budget, capped by what the PAs can draw.
    pub fn power_target(&self) -> f64 {
        self.budget.min(4.0 * self.num_pas() as f64 * self.p_max / PI)
    }

    pub fn validate(&self, h_ef: &ComplexMatrix) -> Result<()> {
        if !(self.noise > 0.0 && self.budget > 0.0 && self.p_max > 0.0) {
            return Err(invalid("noise, budget and P_max must be positive"));
        }
        if self.streams == 0 || self.streams > self.tx_analog.ncols() {
            return Err(invalid(format!(
                "stream count {} must be in 1..={}",
                self.streams,
                self.tx_analog.ncols()
            )));
        }
        if h_ef.nrows() != self.rx_analog.ncols() || h_ef.ncols() != self.tx_analog.ncols() {
            return Err(mismatch(
                "LinkRole",
                format!(
                    "effective channel {:?} vs rx RF {} and tx RF {}",
                    h_ef.shape(),
                    self.rx_analog.ncols(),
                    self.tx_analog.ncols()
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcccpConfig {
    /// Initial penalty coefficient `ϱ⁰`.
    pub rho0: f64,
    /// Multiplier applied to `ϱ` after every outer iteration.
    pub shrink: f64,
    /// Tolerance on successive objective values.
    pub tol_objective: f64,
    /// Tolerance on the penalty residual.
    pub tol_penalty: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Record the objective after every block update.
    pub track_blocks: bool,
}

impl Default for PcccpConfig {
    fn default() -> Self {
        Self {
            rho0: 0.1,
            shrink: 0.8,
            tol_objective: 1e-3,
            tol_penalty: 1e-8,
            max_inner: 200,
            max_outer: 100,
            track_blocks: false,
        }
    }
}

impl PcccpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0) {
            return Err(invalid("initial penalty coefficient must be positive"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(invalid(format!("penalty multiplier must be in (0, 1), got {}", self.shrink)));
        }
        if !(self.tol_objective > 0.0 && self.tol_penalty > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return Err(invalid("iteration limits must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcccpState {
    /// Digital precoder.
    pub w: ComplexMatrix,
    /// Digital receiver.
    pub v: ComplexMatrix,
    /// MSE weight matrix.
    pub z: ComplexMatrix,
    /// Consumed power per PA (watt).
    pub p_pa: Vec<f64>,
    /// Output amplitude per PA (√watt).
    pub v_out: Vec<f64>,
    /// Penalty coefficient `ϱ`.
    pub rho: f64,
    pub inner: usize,
    pub outer: usize,
    /// Set when a linear solve needed diagonal loading.
    pub regularized: bool,
}

/// `E = (V^H H W − I)(V^H H W − I)^H + σ² V^H A^H A V`.
pub fn mse_matrix(
    v: &ComplexMatrix,
    h_ef: &ComplexMatrix,
    w: &ComplexMatrix,
    rx_analog: &ComplexMatrix,
    noise: f64,
) -> Result<ComplexMatrix> {
    if v.nrows() != h_ef.nrows()
        || h_ef.ncols() != w.nrows()
        || v.ncols() != w.ncols()
        || rx_analog.ncols() != v.nrows()
    {
        return Err(invalid(format!(
            "mse_matrix shapes: V {:?}, H {:?}, W {:?}, A {:?}",
            v.shape(),
            h_ef.shape(),
            w.shape(),
            rx_analog.shape()
        )));
    }
    let d = w.ncols();
    let err = v.adjoint() * h_ef * w - identity(d);
    let av = rx_analog * v;
    Ok(hermitian_part(&(&err * err.adjoint() + (av.adjoint() * av).map(|z| z * noise))))
}

/// `tr(Z E) − ln det Z`.
pub fn wmmse_objective(z: &ComplexMatrix, e: &ComplexMatrix) -> Result<f64> {
    if z.shape() != e.shape() || !z.is_square() {
        return Err(invalid("Z and E must be square of equal size"));
    }
    let logdet = logdet_hpd(z).map_err(|_| invalid("Z must be Hermitian positive definite"))?;
    Ok((z * e).trace().re - logdet)
}

/// Linear MMSE receiver `[σ² A^H A + H W W^H H^H]^{-1} H W`; the flag reports diagonal loading.
pub fn mmse_receiver(
    h_ef: &ComplexMatrix,
    w: &ComplexMatrix,
    rx_analog: &ComplexMatrix,
    noise: f64,
) -> Result<(ComplexMatrix, bool)> {
    if h_ef.ncols() != w.nrows() || rx_analog.ncols() != h_ef.nrows() {
        return Err(mismatch(
            "mmse_receiver",
            format!("H {:?}, W {:?}, A {:?}", h_ef.shape(), w.shape(), rx_analog.shape()),
        ));
    }
    let hw = h_ef * w;
    let m = (rx_analog.adjoint() * rx_analog).map(|z| z * noise) + &hw * hw.adjoint();
    Ok(solve_hpd_regularized(&m, &hw))
}

/// Output amplitude `‖F(i,:) W‖` of every PA.
pub fn pa_amplitudes(tx_analog: &ComplexMatrix, w: &ComplexMatrix) -> Vec<f64> {
    (tx_analog * w).row_iter().map(|r| r.norm()).collect()
}

/// Sum of squared equality residuals; zero exactly at feasible points.
pub fn penalty_value(state: &PcccpState, tx_analog: &ComplexMatrix, target: f64, p_max: f64) -> f64 {
    let amps = pa_amplitudes(tx_analog, &state.w);
    let mut total = 0.0;
    for i in 0..state.p_pa.len() {
        total += (state.p_pa[i] - h_unchecked(state.v_out[i], p_max)).powi(2);
        total += (amps[i] - state.v_out[i]).powi(2);
    }
    total + (state.p_pa.iter().sum::<f64>() - target).powi(2)
}

/// Penalized objective at the current state.
pub fn penalized_objective(state: &PcccpState, h_ef: &ComplexMatrix, role: &LinkRole) -> Result<f64> {
    let e = mse_matrix(&state.v, h_ef, &state.w, role.rx_analog, role.noise)?;
    let base = wmmse_objective(&state.z, &e)?;
    let pen = penalty_value(state, role.tx_analog, role.power_target(), role.p_max);
    Ok(base + pen / (2.0 * state.rho))
}

/// Receiver update followed by one cyclic sweep over the PA consumptions.
pub fn update_block1(state: &PcccpState, h_ef: &ComplexMatrix, role: &LinkRole) -> Result<PcccpState> {
    let mut next = state.clone();
    let (v, flagged) = mmse_receiver(h_ef, &state.w, role.rx_analog, role.noise)?;
    next.v = v;
    next.regularized |= flagged;
    let target = role.power_target();
    let cap = 4.0 * role.p_max / PI;
    let mut sum: f64 = next.p_pa.iter().sum();
    for i in 0..next.p_pa.len() {
        let others = sum - next.p_pa[i];
        let value = ((h_unchecked(next.v_out[i], role.p_max) + target - others) / 2.0).clamp(0.0, cap);
        next.p_pa[i] = value;
        sum = others + value;
    }
    Ok(next)
}

fn amplitude_residual(p_pa: f64, amp: f64, x: f64, p_max: f64) -> f64 {
    (p_pa - h_unchecked(x, p_max)).powi(2) + (amp - x).powi(2)
}

/// Minimizer over `x ∈ [0, √P_max]` of `(P_PA − h(x))² + (amp − x)²`.
pub fn best_amplitude(p_pa: f64, amp: f64, p_max: f64) -> f64 {
    let s = p_max.sqrt();
    let pi2 = PI * PI;
    let x1 = (pi2 * (2.0 * s * p_pa / PI + amp) / (pi2 + 4.0 * p_max)).clamp(0.0, s / 2.0);
    let x2 = (pi2 * (6.0 * s * p_pa / PI + amp + 12.0 * p_max * s / pi2) / (pi2 + 36.0 * p_max)).clamp(s / 2.0, s);
    if amplitude_residual(p_pa, amp, x1, p_max) <= amplitude_residual(p_pa, amp, x2, p_max) {
        x1
    } else {
        x2
    }
}

/// Weight-matrix update `Z = E^{-1}` and per-PA amplitude update.
pub fn update_block2(state: &PcccpState, h_ef: &ComplexMatrix, role: &LinkRole) -> Result<PcccpState> {
    let mut next = state.clone();
    let e = mse_matrix(&state.v, h_ef, &state.w, role.rx_analog, role.noise)?;
    let (z, flagged) = solve_hpd_regularized(&e, &identity(e.nrows()));
    next.z = hermitian_part(&z);
    next.regularized |= flagged;
    let amps = pa_amplitudes(role.tx_analog, &state.w);
    for i in 0..next.v_out.len() {
        next.v_out[i] = best_amplitude(state.p_pa[i], amps[i], role.p_max);
    }
    Ok(next)
}

/// Rows whose output amplitude falls below this are not linearized.
const KINK: f64 = 1e-12;

/// Precoder update from the linearized (majorized) penalty.
pub fn update_block3(state: &PcccpState, h_ef: &ComplexMatrix, role: &LinkRole) -> Result<PcccpState> {
    let f = role.tx_analog;
    let w_bar = &state.w;
    let weight = 1.0 / (2.0 * state.rho);
    let hv = h_ef.adjoint() * &state.v;
    let hvz = &hv * &state.z;
    let mut lhs = &hvz * hv.adjoint() + (f.adjoint() * f).map(|z| z * weight);
    lhs = hermitian_part(&lhs);
    let mut rhs = hvz;
    let fw = f * w_bar;
    for i in 0..f.nrows() {
        let norm = fw.row(i).norm();
        if norm < KINK {
            continue;
        }
        let coef = state.v_out[i] * weight / norm;
        let row = f.row(i);
        // F(i,:)^H F(i,:) W̄ = F(i,:)^H (F(i,:) W̄)
        rhs += (row.adjoint() * fw.row(i)).map(|z| z * coef);
    }
    let (w, flagged) = solve_hpd_regularized(&lhs, &rhs);
    let mut next = state.clone();
    next.w = w;
    next.regularized |= flagged;
    Ok(next)
}

/// One record per inner iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub outer: usize,
    pub inner: usize,
    pub objective: f64,
    pub penalty: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    /// Iteration limit reached with the penalty still above tolerance.
    MaxIterations,
    /// Effective channel identically zero; the precoder is zero.
    ZeroChannel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcccpSolution {
    /// Returned precoder, scaled down if the solver output was marginally infeasible.
    pub w: ComplexMatrix,
    /// Solver output before any feasibility scaling.
    pub raw_w: ComplexMatrix,
    /// Scale factor applied to `raw_w` (1 when untouched).
    pub scale: f64,
    pub state: PcccpState,
    pub status: SolveStatus,
    pub penalty: f64,
    /// Set when the scaled starting precoder achieved a higher rate than the
    /// solver output and was returned instead.
    pub kept_initial: bool,
    pub trace: Vec<TraceRecord>,
    /// Objective before and after each of the three blocks, per inner
    /// iteration, when tracking is enabled.
    pub block_objectives: Vec<[f64; 4]>,
}

impl PcccpSolution {
    pub fn converged(&self) -> bool {
        self.status != SolveStatus::MaxIterations
    }
}

/// Feasibility of `W` against the summed-consumption budget and the per-PA output cap.
pub fn constraint_excess(tx_analog: &ComplexMatrix, w: &ComplexMatrix, budget: f64, p_max: f64) -> (f64, f64) {
    let outputs: Vec<f64> = (tx_analog * w).row_iter().map(|r| r.norm_squared()).collect();
    let per_pa = outputs.iter().fold(f64::NEG_INFINITY, |m, &p| m.max(p - p_max));
    let total: f64 = outputs.iter().map(|&p| pa_power_unchecked(p, p_max)).sum();
    (total - budget, per_pa)
}

fn feasible(tx_analog: &ComplexMatrix, w: &ComplexMatrix, budget: f64, p_max: f64) -> bool {
    let (total, per_pa) = constraint_excess(tx_analog, w, budget, p_max);
    total <= 0.0 && per_pa <= 0.0
}

/// Largest `s ∈ (0, 1]` (by bisection) such that `s·W` meets both PA constraints.
pub fn scale_to_constraints(tx_analog: &ComplexMatrix, w: &ComplexMatrix, budget: f64, p_max: f64) -> (ComplexMatrix, f64) {
    if feasible(tx_analog, w, budget, p_max) {
        return (w.clone(), 1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if feasible(tx_analog, &w.map(|z| z * mid), budget, p_max) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    (w.map(|z| z * lo), lo)
}

/// Water-filling over the top `streams` modes of `H̄ Q^{-1/2}` against
/// `tr(Q W W^H) ≤ power`, where `H̄` is the receive-whitened effective channel.
/// No PA model is applied.
pub fn waterfill_precoder(
    h_ef: &ComplexMatrix,
    rx_analog: &ComplexMatrix,
    tx_analog: &ComplexMatrix,
    noise: f64,
    power: f64,
    streams: usize,
) -> Result<ComplexMatrix> {
    let r_tx = tx_analog.ncols();
    let q_inv_sqrt = inverse_sqrt_hpd(&(tx_analog.adjoint() * tx_analog))
        .map_err(|_| Error::RankDeficient("transmit analog matrix has dependent columns".into()))?;
    // whiten with the right singular vectors and singular values of the receive analog matrix
    let rx_svd = SVD::new(rx_analog.clone(), false, true);
    let v_bar_h = rx_svd
        .v_t
        .ok_or_else(|| Error::Degenerate("SVD of the receive analog matrix failed".into()))?;
    let sv = &rx_svd.singular_values;
    if sv.iter().any(|&s| s <= 0.0) || sv.len() != rx_analog.ncols() {
        return Err(Error::RankDeficient("receive analog matrix has dependent columns".into()));
    }
    let mut h_bar = &v_bar_h * h_ef;
    for (i, s) in sv.iter().enumerate() {
        let inv = c(1.0 / s);
        h_bar.row_mut(i).iter_mut().for_each(|z| *z *= inv);
    }
    let g = &h_bar * &q_inv_sqrt;
    // right singular vectors of G are the eigenvectors of G^H G
    let eig = SymmetricEigen::new(hermitian_part(&(g.adjoint() * &g)));
    let mut order: Vec<usize> = (0..r_tx).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let d = streams.min(r_tx);
    let gains: Vec<f64> = order[..d].iter().map(|&k| eig.eigenvalues[k].max(0.0) / noise).collect();
    let alloc = waterfill(&gains, power);
    let mut w = ComplexMatrix::zeros(r_tx, streams);
    for (col, &k) in order[..d].iter().enumerate() {
        let amp = c(alloc[col].sqrt());
        let vec = eig.eigenvectors.column(k).map(|z| z * amp);
        w.set_column(col, &(&q_inv_sqrt * vec));
    }
    Ok(w)
}

/// Powers `p_k = max(0, μ − 1/g_k)` with `Σ p_k = power`; zero when every gain vanishes.
pub fn waterfill(gains: &[f64], power: f64) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..gains.len()).filter(|&k| gains[k] > 0.0).collect();
    let mut out = vec![0.0; gains.len()];
    if idx.is_empty() || !(power > 0.0) {
        return out;
    }
    idx.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    // drop the weakest modes until the water level clears all of them
    let mut active = idx.len();
    let level = loop {
        let inv_sum: f64 = idx[..active].iter().map(|&k| 1.0 / gains[k]).sum();
        let mu = (power + inv_sum) / active as f64;
        if mu - 1.0 / gains[idx[active - 1]] > 0.0 || active == 1 {
            break mu;
        }
        active -= 1;
    };
    for &k in &idx[..active] {
        out[k] = (level - 1.0 / gains[k]).max(0.0);
    }
    out
}

/// Low-complexity precoder: water-filling against the output-power budget,
/// then scaled down until the PA constraints hold.
pub fn waterfilling_heuristic(h_ef: &ComplexMatrix, role: &LinkRole) -> Result<ComplexMatrix> {
    role.validate(h_ef)?;
    let w = waterfill_precoder(h_ef, role.rx_analog, role.tx_analog, role.noise, role.budget, role.streams)?;
    Ok(scale_to_constraints(role.tx_analog, &w, role.budget, role.p_max).0)
}

/// Splits `total` in proportion to `shares` (evenly if all are zero) with no
/// entry above `cap`; the overflow of capped entries goes to the others.
fn spread_within_cap(shares: &[f64], total: f64, cap: f64) -> Vec<f64> {
    let n = shares.len();
    let mut out = vec![0.0; n];
    let mut free: Vec<usize> = (0..n).collect();
    let mut remaining = total;
    let even = shares.iter().all(|&s| s <= 0.0);
    while !free.is_empty() {
        let weight = |i: usize| if even { 1.0 } else { shares[i].max(0.0) };
        let sum: f64 = free.iter().map(|&i| weight(i)).sum();
        if sum <= 0.0 {
            let each = remaining / free.len() as f64;
            free.iter().for_each(|&i| out[i] = each.min(cap));
            break;
        }
        let over: Vec<usize> = free.iter().copied().filter(|&i| remaining * weight(i) / sum > cap).collect();
        if over.is_empty() {
            free.iter().for_each(|&i| out[i] = remaining * weight(i) / sum);
            break;
        }
        for &i in &over {
            out[i] = cap;
            remaining -= cap;
        }
        free.retain(|i| !over.contains(i));
    }
    out
}

/// Feasible-leaning starting point around precoder `w`.
pub fn initial_state(h_ef: &ComplexMatrix, role: &LinkRole, w: ComplexMatrix, rho: f64) -> Result<PcccpState> {
    let (v, flag_v) = mmse_receiver(h_ef, &w, role.rx_analog, role.noise)?;
    let e = mse_matrix(&v, h_ef, &w, role.rx_analog, role.noise)?;
    let (z, flag_z) = solve_hpd_regularized(&e, &identity(e.nrows()));
    let v_out: Vec<f64> = pa_amplitudes(role.tx_analog, &w)
        .into_iter()
        .map(|a| a.min(role.p_max.sqrt()))
        .collect();
    let shares: Vec<f64> = v_out.iter().map(|&a| h_unchecked(a, role.p_max)).collect();
    let p_pa = spread_within_cap(&shares, role.power_target(), 4.0 * role.p_max / PI);
    Ok(PcccpState {
        w,
        v,
        z: hermitian_part(&z),
        p_pa,
        v_out,
        rho,
        inner: 0,
        outer: 0,
        regularized: flag_v || flag_z,
    })
}

/// Penalty-CCCP double loop for one link.
pub fn pcccp_solve(
    role: &LinkRole,
    h_ef: &ComplexMatrix,
    config: &PcccpConfig,
    init: Option<&ComplexMatrix>,
) -> Result<PcccpSolution> {
    config.validate()?;
    role.validate(h_ef)?;
    let n_tx = role.tx_analog.ncols();
    if h_ef.iter().all(|z| *z == c(0.0)) {
        let w = ComplexMatrix::zeros(n_tx, role.streams);
        let state = initial_state(h_ef, role, w.clone(), config.rho0)?;
        return Ok(PcccpSolution {
            w: w.clone(),
            raw_w: w,
            scale: 1.0,
            state,
            status: SolveStatus::ZeroChannel,
            penalty: 0.0,
            kept_initial: false,
            trace: Vec::new(),
            block_objectives: Vec::new(),
        });
    }
    let w0 = match init {
        Some(w) => {
            if w.shape() != (n_tx, role.streams) {
                return Err(mismatch("pcccp_solve", format!("initial W {:?}", w.shape())));
            }
            w.clone()
        }
        None => waterfilling_heuristic(h_ef, role)?,
    };
    let mut state = initial_state(h_ef, role, w0.clone(), config.rho0)?;
    let target = role.power_target();
    let mut trace = Vec::new();
    let mut blocks = Vec::new();
    let mut last_outer: Option<f64> = None;
    let mut status = SolveStatus::MaxIterations;

    for outer in 0..config.max_outer {
        state.outer = outer;
        let mut objective = penalized_objective(&state, h_ef, role)?;
        for inner in 0..config.max_inner {
            state.inner = inner;
            let before = objective;
            let s1 = update_block1(&state, h_ef, role)?;
            let s2 = update_block2(&s1, h_ef, role)?;
            let s3 = update_block3(&s2, h_ef, role)?;
            objective = penalized_objective(&s3, h_ef, role)?;
            if config.track_blocks {
                blocks.push([
                    before,
                    penalized_objective(&s1, h_ef, role)?,
                    penalized_objective(&s2, h_ef, role)?,
                    objective,
                ]);
            }
            state = s3;
            let penalty = penalty_value(&state, role.tx_analog, target, role.p_max);
            trace.push(TraceRecord {
                outer,
                inner,
                objective,
                penalty,
                rho: state.rho,
            });
            if (objective - before).abs() < config.tol_objective {
                break;
            }
        }
        let penalty = penalty_value(&state, role.tx_analog, target, role.p_max);
        let settled = last_outer.is_some_and(|prev| (objective - prev).abs() < config.tol_objective);
        if settled && penalty < config.tol_penalty {
            status = SolveStatus::Converged;
            break;
        }
        last_outer = Some(objective);
        if outer + 1 < config.max_outer {
            state.rho *= config.shrink;
        }
    }

    let penalty = penalty_value(&state, role.tx_analog, target, role.p_max);
    let raw_w = state.w.clone();
    let (mut w, scale) = scale_to_constraints(role.tx_analog, &raw_w, role.budget, role.p_max);
    // the double loop is a local method; never return less than its start
    let (start, _) = scale_to_constraints(role.tx_analog, &w0, role.budget, role.p_max);
    let kept_initial = wmmse_rate_nats(h_ef, &start, role.rx_analog, role.noise)?
        > wmmse_rate_nats(h_ef, &w, role.rx_analog, role.noise)?;
    if kept_initial {
        w = start;
    }
    Ok(PcccpSolution {
        w,
        raw_w,
        scale,
        state,
        status,
        penalty,
        kept_initial,
        trace,
        block_objectives: blocks,
    })
}

/// Rate integrand `ln det(E^{-1})` reached by the WMMSE substitution at fixed `W`.
pub fn wmmse_rate_nats(h_ef: &ComplexMatrix, w: &ComplexMatrix, rx_analog: &ComplexMatrix, noise: f64) -> Result<f64> {
    let (v, _) = mmse_receiver(h_ef, w, rx_analog, noise)?;
    let e = mse_matrix(&v, h_ef, w, rx_analog, noise)?;
    let (z, _) = solve_hpd_regularized(&e, &identity(e.nrows()));
    Ok(w.ncols() as f64 - wmmse_objective(&hermitian_part(&z), &e)?)
}
