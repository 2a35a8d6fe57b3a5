//! Long-term analog beamforming by stochastic successive convex approximation.
//!
//! Each frame a channel sample refreshes a quadratic surrogate of the negated
//! weighted capacity; the surrogate minimizer is blended into the current
//! phases with a diminishing step.

use std::f64::consts::{LN_2, TAU};

use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelTriple;
use crate::error::{invalid, mismatch, Error, Result};
use crate::linalg::{cholesky, identity, phase_matrix};
use crate::system::{quantize_phases, ComplexMatrix, RealMatrix, SystemDims};

/// Phase matrices (radians) of the four analog beamformers: BS combiner for
/// the uplink, BS precoder for the downlink, user A precoder and user B combiner.
///
/// The same layout holds phase gradients and surrogate coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogSet {
    pub bs_rx: RealMatrix,
    pub bs_tx: RealMatrix,
    pub user_a: RealMatrix,
    pub user_b: RealMatrix,
}

/// Complex unit-modulus analog matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogMatrices {
    pub bs_rx: ComplexMatrix,
    pub bs_tx: ComplexMatrix,
    pub user_a: ComplexMatrix,
    pub user_b: ComplexMatrix,
}

impl AnalogSet {
    pub fn zeros(dims: &SystemDims) -> Self {
        Self {
            bs_rx: RealMatrix::zeros(dims.n_bs, dims.n_rf),
            bs_tx: RealMatrix::zeros(dims.n_bs, dims.n_rf),
            user_a: RealMatrix::zeros(dims.n_a, dims.n_rfa),
            user_b: RealMatrix::zeros(dims.n_b, dims.n_rfb),
        }
    }

    /// Phases drawn uniformly on `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dims: &SystemDims) -> Self {
        let mut draw = |r: usize, c: usize| RealMatrix::from_fn(r, c, |_, _| rng.random_range(0.0..TAU));
        Self {
            bs_rx: draw(dims.n_bs, dims.n_rf),
            bs_tx: draw(dims.n_bs, dims.n_rf),
            user_a: draw(dims.n_a, dims.n_rfa),
            user_b: draw(dims.n_b, dims.n_rfb),
        }
    }

    pub fn blocks(&self) -> [&RealMatrix; 4] {
        [&self.bs_rx, &self.bs_tx, &self.user_a, &self.user_b]
    }

    pub(crate) fn blocks_mut(&mut self) -> [&mut RealMatrix; 4] {
        [&mut self.bs_rx, &mut self.bs_tx, &mut self.user_a, &mut self.user_b]
    }

    pub fn same_shape(&self, other: &AnalogSet) -> bool {
        self.blocks()
            .iter()
            .zip(other.blocks())
            .all(|(a, b)| a.shape() == b.shape())
    }

    /// `a·self + b·other`, blockwise.
    pub fn combine(&self, a: f64, other: &AnalogSet, b: f64) -> Result<AnalogSet> {
        if !self.same_shape(other) {
            return Err(mismatch("AnalogSet::combine", "block shapes differ"));
        }
        let mut out = self.clone();
        for (o, x) in out.blocks_mut().into_iter().zip(other.blocks()) {
            *o = &*o * a + x * b;
        }
        Ok(out)
    }

    pub fn matrices(&self) -> AnalogMatrices {
        AnalogMatrices {
            bs_rx: phase_matrix(&self.bs_rx),
            bs_tx: phase_matrix(&self.bs_tx),
            user_a: phase_matrix(&self.user_a),
            user_b: phase_matrix(&self.user_b),
        }
    }

    pub fn quantized(&self, bits: u32) -> Result<AnalogSet> {
        Ok(AnalogSet {
            bs_rx: quantize_phases(&self.bs_rx, bits)?,
            bs_tx: quantize_phases(&self.bs_tx, bits)?,
            user_a: quantize_phases(&self.user_a, bits)?,
            user_b: quantize_phases(&self.user_b, bits)?,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|b| b.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Link weights of the long-term objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights(pub [f64; 3]);

impl Weights {
    pub fn new(w: [f64; 3]) -> Result<Self> {
        if w.iter().any(|x| !(*x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("weights must be non-negative and sum to 1, got {w:?}")));
        }
        Ok(Self(w))
    }

    pub fn uniform() -> Self {
        Self([1.0 / 3.0; 3])
    }

    /// Weights proportional to the bits each link carried; uniform when nothing moved.
    pub fn from_bits(bits: [f64; 3]) -> Self {
        let total: f64 = bits.iter().sum();
        if !(total > 0.0 && total.is_finite()) || bits.iter().any(|b| !(*b >= 0.0)) {
            return Self::uniform();
        }
        Self(bits.map(|b| b / total))
    }
}

struct LinkTerms {
    capacity: f64,
    /// `∂C/∂A*` for the receive analog matrix.
    d_rx: ComplexMatrix,
    /// `∂C/∂F*` for the transmit analog matrix.
    d_tx: ComplexMatrix,
}

fn chol(m: ComplexMatrix, what: &str) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    cholesky(&m).ok_or_else(|| Error::RankDeficient(format!("{what} is singular")))
}

/// Capacity `log2 det[I + A^H H F F^H H^H A (A^H A)^{-1} / σ²]` and its
/// conjugate derivatives. With `B = H F`, `M = A^H B`, `G = A^H A` and
/// `S = σ² I + M^H G^{-1} M`, the capacity is `log2 det(S/σ²)` and
///
/// ```text
/// ∂C/∂A* = (I − A G^{-1} A^H) B S^{-1} M^H G^{-1} / ln 2
/// ∂C/∂F* = H^H A G^{-1} M S^{-1} / ln 2
/// ```
fn link_terms(rx: &ComplexMatrix, h: &ComplexMatrix, tx: &ComplexMatrix, noise: f64, grads: bool) -> Result<LinkTerms> {
    if rx.nrows() != h.nrows() || h.ncols() != tx.nrows() {
        return Err(mismatch(
            "weighted_capacity",
            format!("rx {:?}, H {:?}, tx {:?}", rx.shape(), h.shape(), tx.shape()),
        ));
    }
    let g = chol(rx.adjoint() * rx, "receive analog Gram matrix")?;
    let b = h * tx;
    let m = rx.adjoint() * &b;
    let ginv_m = g.solve(&m);
    let r = tx.ncols();
    let s = identity(r).map(|z| z * noise) + m.adjoint() * &ginv_m;
    let s_chol = chol(s, "capacity kernel")?;
    let logdet: f64 = s_chol.l_dirty().diagonal().iter().map(|z| 2.0 * z.re.ln()).sum();
    let capacity = (logdet - r as f64 * noise.ln()) / LN_2;
    if !grads {
        return Ok(LinkTerms {
            capacity,
            d_rx: ComplexMatrix::zeros(0, 0),
            d_tx: ComplexMatrix::zeros(0, 0),
        });
    }
    // S^{-1} M^H G^{-1} = (G^{-1} M S^{-1})^H
    let k = s_chol.solve(&ginv_m.adjoint()).adjoint();
    let k_h = k.adjoint();
    let residual = &b - rx * &ginv_m;
    let d_rx = (residual * k_h).map(|z| z / LN_2);
    let d_tx = (h.adjoint() * rx * k).map(|z| z / LN_2);
    Ok(LinkTerms { capacity, d_rx, d_tx })
}

fn check_noise(noise: &[f64; 3]) -> Result<()> {
    if noise.iter().any(|n| !(*n > 0.0)) {
        return Err(invalid("noise powers must be positive"));
    }
    Ok(())
}

/// Per-link capacities (bits/s/Hz) of a channel sample under the given analog matrices.
pub fn capacities(analog: &AnalogSet, channels: &ChannelTriple, noise: [f64; 3]) -> Result<[f64; 3]> {
    check_noise(&noise)?;
    let m = analog.matrices();
    Ok([
        link_terms(&m.bs_rx, &channels.h1, &m.user_a, noise[0], false)?.capacity,
        link_terms(&m.user_b, &channels.h2, &m.bs_tx, noise[1], false)?.capacity,
        link_terms(&m.user_b, &channels.h3, &m.user_a, noise[2], false)?.capacity,
    ])
}

pub fn weighted_capacity(analog: &AnalogSet, channels: &ChannelTriple, w: &Weights, noise: [f64; 3]) -> Result<f64> {
    let c = capacities(analog, channels, noise)?;
    Ok(w.0.iter().zip(c).map(|(w, c)| w * c).sum())
}

/// `∂g/∂θ = 2 Re(conj(∂g/∂U*) ∘ jU)`.
fn phase_gradient(d: &ComplexMatrix, u: &ComplexMatrix) -> RealMatrix {
    RealMatrix::from_fn(u.nrows(), u.ncols(), |i, j| {
        let ju = Complex64::new(0.0, 1.0) * u[(i, j)];
        2.0 * (d[(i, j)].conj() * ju).re
    })
}

/// Weighted capacity and its phase gradients for one channel sample.
pub fn capacity_and_gradients(
    analog: &AnalogSet,
    channels: &ChannelTriple,
    w: &Weights,
    noise: [f64; 3],
) -> Result<(f64, AnalogSet)> {
    check_noise(&noise)?;
    let m = analog.matrices();
    let up = link_terms(&m.bs_rx, &channels.h1, &m.user_a, noise[0], true)?;
    let down = link_terms(&m.user_b, &channels.h2, &m.bs_tx, noise[1], true)?;
    let d2d = link_terms(&m.user_b, &channels.h3, &m.user_a, noise[2], true)?;
    let [w1, w2, w3] = w.0;
    let value = w1 * up.capacity + w2 * down.capacity + w3 * d2d.capacity;
    let d_user_a = up.d_tx.map(|z| z * w1) + d2d.d_tx.map(|z| z * w3);
    let d_user_b = down.d_rx.map(|z| z * w2) + d2d.d_rx.map(|z| z * w3);
    let grads = AnalogSet {
        bs_rx: phase_gradient(&up.d_rx.map(|z| z * w1), &m.bs_rx),
        bs_tx: phase_gradient(&down.d_tx.map(|z| z * w2), &m.bs_tx),
        user_a: phase_gradient(&d_user_a, &m.user_a),
        user_b: phase_gradient(&d_user_b, &m.user_b),
    };
    Ok((value, grads))
}

pub fn capacity_gradients(analog: &AnalogSet, channels: &ChannelTriple, w: &Weights, noise: [f64; 3]) -> Result<AnalogSet> {
    Ok(capacity_and_gradients(analog, channels, w, noise)?.1)
}

/// Recursively averaged surrogate of the negated weighted capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateState {
    pub value: f64,
    pub grad: AnalogSet,
    /// Proximal weight of the quadratic term.
    pub prox_weight: f64,
    /// Index of the last absorbed sample; `-1` before the first.
    pub iteration: i64,
}

impl SurrogateState {
    pub fn new(dims: &SystemDims, prox_weight: f64) -> Result<Self> {
        if !(prox_weight > 0.0 && prox_weight.is_finite()) {
            return Err(invalid(format!("proximal weight must be positive, got {prox_weight}")));
        }
        Ok(Self {
            value: 0.0,
            grad: AnalogSet::zeros(dims),
            prox_weight,
            iteration: -1,
        })
    }

    /// Surrogate value at `theta` around the expansion point `center`.
    pub fn evaluate(&self, center: &AnalogSet, theta: &AnalogSet) -> Result<f64> {
        let diff = theta.combine(1.0, center, -1.0)?;
        let mut v = self.value;
        for (f, d) in self.grad.blocks().iter().zip(diff.blocks()) {
            v += f.dot(d) + self.prox_weight * d.norm_squared();
        }
        Ok(v)
    }
}

/// Absorbs one sample: `f ← (1−ε) f − ε·sample` for the value and every gradient block.
pub fn surrogate_update(state: &SurrogateState, sample_value: f64, sample_grads: &AnalogSet, eps: f64) -> Result<SurrogateState> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid(format!("surrogate step must be in (0, 1], got {eps}")));
    }
    Ok(SurrogateState {
        value: (1.0 - eps) * state.value - eps * sample_value,
        grad: state.grad.combine(1.0 - eps, sample_grads, -eps)?,
        prox_weight: state.prox_weight,
        iteration: state.iteration + 1,
    })
}

/// Minimizer `θ − f/(2ϖ)` of the quadratic surrogate.
pub fn surrogate_minimize(state: &SurrogateState, analog: &AnalogSet) -> Result<AnalogSet> {
    analog.combine(1.0, &state.grad, -1.0 / (2.0 * state.prox_weight))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSchedule {
    /// `ε = (1+t)^{-a}`, `γ = (1+t)^{-b}`.
    Polynomial { a: f64, b: f64 },
    /// `ε = ε_base^t`, `γ = γ_base^t`.
    Geometric { eps_base: f64, gamma_base: f64 },
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::Polynomial { a: 0.6, b: 0.9 }
    }
}

impl StepSchedule {
    pub fn geometric() -> Self {
        StepSchedule::Geometric {
            eps_base: 0.6,
            gamma_base: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Polynomial { a, b } => {
                if !(a > 0.5 && a <= 1.0) || !(b > a && b <= 1.0) {
                    return Err(invalid(format!("polynomial schedule needs 0.5 < a < b ≤ 1, got a={a}, b={b}")));
                }
            }
            StepSchedule::Geometric { eps_base, gamma_base } => {
                if !(eps_base > 0.0 && eps_base < 1.0) || !(gamma_base > 0.0 && gamma_base < 1.0) {
                    return Err(invalid("geometric schedule bases must be in (0, 1)"));
                }
            }
        }
        Ok(())
    }
}

/// `(ε^t, γ^t)` for iteration `t ≥ 0`.
pub fn step_schedule(t: u64, schedule: &StepSchedule) -> Result<(f64, f64)> {
    schedule.validate()?;
    let tf = t as f64;
    Ok(match *schedule {
        StepSchedule::Polynomial { a, b } => ((1.0 + tf).powf(-a), (1.0 + tf).powf(-b)),
        StepSchedule::Geometric { eps_base, gamma_base } => {
            let t = i32::try_from(t).unwrap_or(i32::MAX);
            (eps_base.powi(t), gamma_base.powi(t))
        }
    })
}

/// One frame of the SSCA recursion with explicit steps. Returns the new
/// phases, the new surrogate and the sampled weighted capacity.
pub fn ssca_step(
    analog: &AnalogSet,
    state: &SurrogateState,
    sample: &ChannelTriple,
    w: &Weights,
    noise: [f64; 3],
    eps: f64,
    gamma: f64,
) -> Result<(AnalogSet, SurrogateState, f64)> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid(format!("blend step must be in [0, 1], got {gamma}")));
    }
    let (g, grads) = capacity_and_gradients(analog, sample, w, noise)?;
    let next_state = surrogate_update(state, g, &grads, eps)?;
    let target = surrogate_minimize(&next_state, analog)?;
    let next = analog.combine(1.0 - gamma, &target, gamma)?;
    Ok((next, next_state, g))
}

/// One frame of the SSCA recursion using the schedule value at the state's next iteration.
pub fn ssca_iterate(
    analog: &AnalogSet,
    state: &SurrogateState,
    sample: &ChannelTriple,
    w: &Weights,
    noise: [f64; 3],
    schedule: &StepSchedule,
) -> Result<(AnalogSet, SurrogateState, f64)> {
    let t = (state.iteration + 1).max(0) as u64;
    let (eps, gamma) = step_schedule(t, schedule)?;
    ssca_step(analog, state, sample, w, noise, eps, gamma)
}
