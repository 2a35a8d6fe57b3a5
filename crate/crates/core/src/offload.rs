//! Optimal offloading ratio.
//!
//! `T_total(ρ)` is continuous and piecewise linear with at most three interior
//! breakpoints, so its minimizer is one of them or an endpoint. The closed
//! form below picks it from the signs of the segment slopes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::latency::{timeline_latency, total_latency, DelayCoeffs};

/// Which timeline cases are reachable as `ρ` sweeps `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Situation {
    /// `K_L/K1 ≥ K3/K_E`: case 2 never occurs.
    A,
    /// `K_L/K1 < K3/K_E`: case 4 never occurs.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// Latency non-decreasing from `ρ = 0`.
    A1,
    /// Decreasing then increasing; turning point where local and edge paths end together.
    A2,
    /// Decreasing until edge computing catches up with the D2D transfer.
    B1,
    /// Decreasing until the uplink catches up with local computing.
    B2,
    /// Non-decreasing from `ρ = 0`.
    B4,
    /// No uplink or downlink: compute locally.
    LocalOnly,
    /// No D2D link: offload everything.
    EdgeOnly,
    /// Coefficients outside the closed form's domain; answered by grid search.
    GridSearch,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::A1 => "A1",
            Branch::A2 => "A2",
            Branch::B1 => "B1",
            Branch::B2 => "B2",
            Branch::B4 => "B4",
            Branch::LocalOnly => "local-only",
            Branch::EdgeOnly => "edge-only",
            Branch::GridSearch => "grid",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffloadSolution {
    pub rho: f64,
    pub situation: Option<Situation>,
    pub branch: Branch,
    pub total_latency: f64,
    /// Set when the closed form could not be applied.
    pub fallback: bool,
}

fn solution(rho: f64, situation: Option<Situation>, branch: Branch, k: &DelayCoeffs) -> Result<OffloadSolution> {
    Ok(OffloadSolution {
        rho,
        situation,
        branch,
        total_latency: total_latency(rho, k)?.total,
        fallback: false,
    })
}

/// Interior breakpoints of `T_total(ρ)` that lie in `(0, 1)`.
pub fn breakpoints(k: &DelayCoeffs) -> Vec<f64> {
    let mut out = Vec::with_capacity(3);
    let candidates = [
        k.k_local / (k.k_up + k.k_local),
        k.k_d2d / (k.k_d2d + k.k_edge),
        (k.k_d2d + k.k_local) / (k.k_d2d + k.k_local + k.k_up + k.k_edge),
    ];
    for r in candidates {
        if r.is_finite() && r > 0.0 && r < 1.0 {
            out.push(r);
        }
    }
    out
}

/// Closed-form minimizer of the end-to-end latency.
pub fn optimal_rho(k: &DelayCoeffs) -> Result<OffloadSolution> {
    let all = [k.k_local, k.k_edge, k.k_up, k.k_down, k.k_d2d];
    if all.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(invalid(format!("delay coefficients must be non-negative, got {k:?}")));
    }
    let no_edge_path = k.k_up.is_infinite() || k.k_down.is_infinite();
    if k.k_d2d.is_infinite() {
        if no_edge_path {
            return Err(invalid("no link can deliver the result to user B"));
        }
        return solution(1.0, None, Branch::EdgeOnly, k);
    }
    if no_edge_path {
        return solution(0.0, None, Branch::LocalOnly, k);
    }
    if !(k.k_local > 0.0 && k.k_edge > 0.0 && k.k_up > 0.0) || !k.is_finite() {
        let mut sol = brute_force_rho(k, 1e-5)?;
        sol.fallback = true;
        return Ok(sol);
    }

    let (kl, ke, k1, k2, k3) = (k.k_local, k.k_edge, k.k_up, k.k_down, k.k_d2d);
    let local_slope = k2 - kl - k3;
    if kl * ke >= k1 * k3 {
        if local_slope >= 0.0 {
            solution(0.0, Some(Situation::A), Branch::A1, k)
        } else {
            solution((k3 + kl) / (k3 + kl + k1 + ke), Some(Situation::A), Branch::A2, k)
        }
    } else {
        let waiting_slope = k2 + k1 - k3;
        match (local_slope < 0.0, waiting_slope < 0.0) {
            (true, true) => solution(k3 / (k3 + ke), Some(Situation::B), Branch::B1, k),
            (true, false) => solution(kl / (k1 + kl), Some(Situation::B), Branch::B2, k),
            // a non-negative local slope forces a non-negative waiting slope
            (false, _) => solution(0.0, Some(Situation::B), Branch::B4, k),
        }
    }
}

/// Grid search over `{0, step, 2·step, …, 1}` plus the interior breakpoints,
/// evaluated with the event-driven timeline.
pub fn brute_force_rho(k: &DelayCoeffs, grid_step: f64) -> Result<OffloadSolution> {
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(invalid(format!("grid step must be in (0, 1], got {grid_step}")));
    }
    let n = (1.0 / grid_step).ceil() as usize;
    let mut best = (f64::INFINITY, 0.0);
    let mut consider = |rho: f64| -> Result<()> {
        let t = timeline_latency(rho, k)?.total;
        if t < best.0 {
            best = (t, rho);
        }
        Ok(())
    };
    for i in 0..=n {
        consider((i as f64 * grid_step).min(1.0))?;
    }
    for r in breakpoints(k) {
        consider(r)?;
    }
    Ok(OffloadSolution {
        rho: best.1,
        situation: None,
        branch: Branch::GridSearch,
        total_latency: best.0,
        fallback: false,
    })
}

/// Better of full-local and full-edge execution.
pub fn binary_rho(k: &DelayCoeffs) -> Result<OffloadSolution> {
    let t0 = total_latency(0.0, k)?.total;
    let t1 = total_latency(1.0, k)?.total;
    let rho = if t1 < t0 { 1.0 } else { 0.0 };
    Ok(OffloadSolution {
        rho,
        situation: None,
        branch: if rho == 0.0 { Branch::LocalOnly } else { Branch::EdgeOnly },
        total_latency: t0.min(t1),
        fallback: false,
    })
}
