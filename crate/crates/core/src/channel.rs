//! Geometric multipath mmWave channels for the uplink, downlink and D2D links.
//!
//! Each link is a sum of `L_p` planar paths with fixed angles of arrival and
//! departure (redrawn per super frame), complex Gaussian gains (redrawn per
//! frame) and a per-path Doppler rotation `exp(j 2π f_d Δt cos φ_r)` applied as
//! time elapses inside a frame.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, mismatch, Result};
use crate::system::{ComplexMatrix, SystemDims};

/// Half-wavelength ULA response `(1/√n)[1, e^{jπ sinθ}, …, e^{jπ(n−1) sinθ}]`.
pub fn array_response(theta: f64, n: usize) -> Result<DVector<Complex64>> {
    if n == 0 {
        return Err(invalid("array response needs at least one antenna"));
    }
    let norm = 1.0 / (n as f64).sqrt();
    let phase = PI * theta.sin();
    Ok(DVector::from_fn(n, |k, _| Complex64::from_polar(norm, phase * k as f64)))
}

/// Per-path gain variances of a link.
#[derive(Debug, Clone, PartialEq)]
pub struct PathProfile {
    pub variances: Vec<f64>,
}

impl PathProfile {
    /// One line-of-sight path followed by `num_paths - 1` equal-power scattered paths.
    pub fn los_nlos(num_paths: usize, los: f64, nlos: f64) -> Self {
        let mut variances = vec![nlos; num_paths];
        if let Some(first) = variances.first_mut() {
            *first = los;
        }
        Self { variances }
    }

    /// Profile with Rician factor `psi = σ_1² / Σ_{l≥2} σ_l²` and unit LOS power.
    pub fn rician(num_paths: usize, psi: f64) -> Self {
        let nlos = if num_paths > 1 { 1.0 / (psi * (num_paths - 1) as f64) } else { 0.0 };
        Self::los_nlos(num_paths, 1.0, nlos)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variances.is_empty() {
            return Err(invalid("at least one path is required"));
        }
        if self.variances.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(invalid("path gain variances must be positive"));
        }
        Ok(())
    }
}

/// Paths of one link: gains, arrival/departure angles (radians) and gain variances.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub gains: Vec<Complex64>,
    pub aoa: Vec<f64>,
    pub aod: Vec<f64>,
    pub variances: Vec<f64>,
}

impl PathSet {
    /// Draws angles uniformly on `[−π/2, π/2]` and gains from `CN(0, σ_l²)`.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, profile: &PathProfile) -> Result<Self> {
        profile.validate()?;
        let n = profile.variances.len();
        let aoa = (0..n).map(|_| rng.random_range(-FRAC_PI_2..=FRAC_PI_2)).collect();
        let aod = (0..n).map(|_| rng.random_range(-FRAC_PI_2..=FRAC_PI_2)).collect();
        let mut set = Self {
            gains: vec![Complex64::new(0.0, 0.0); n],
            aoa,
            aod,
            variances: profile.variances.clone(),
        };
        set.redraw_gains(rng);
        Ok(set)
    }

    /// Single deterministic path.
    pub fn single(gain: Complex64, aoa: f64, aod: f64) -> Self {
        Self {
            gains: vec![gain],
            aoa: vec![aoa],
            aod: vec![aod],
            variances: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn redraw_gains<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for (g, &v) in self.gains.iter_mut().zip(&self.variances) {
            let s = (v / 2.0).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *g = Complex64::new(re * s, im * s);
        }
    }

    /// Rotates each gain by its Doppler phase over `dt` seconds.
    pub fn rotate(&mut self, f_d: f64, dt: f64) {
        for (g, &phi) in self.gains.iter_mut().zip(&self.aoa) {
            *g *= Complex64::from_polar(1.0, TAU * f_d * dt * phi.cos());
        }
    }
}

/// Builds `√(n_rx n_tx / L_p) Σ_l α_l a_r(φ_l^r) a_t(φ_l^t)^H e^{j2π f_d τ cos φ_l^r}`.
pub fn channel_matrix(paths: &PathSet, n_rx: usize, n_tx: usize, f_d: f64, tau: f64) -> Result<ComplexMatrix> {
    if paths.is_empty() {
        return Err(invalid("path set is empty"));
    }
    let scale = ((n_rx * n_tx) as f64 / paths.len() as f64).sqrt();
    let mut h = ComplexMatrix::zeros(n_rx, n_tx);
    for l in 0..paths.len() {
        let ar = array_response(paths.aoa[l], n_rx)?;
        let at = array_response(paths.aod[l], n_tx)?;
        let doppler = Complex64::from_polar(1.0, TAU * f_d * tau * paths.aoa[l].cos());
        let coeff = paths.gains[l] * doppler * scale;
        h += (ar * at.adjoint()) * coeff;
    }
    Ok(h)
}

/// Draws fresh gains for `paths` (angles kept) and returns the resulting channel.
pub fn sample_channel<R: Rng + ?Sized>(
    rng: &mut R,
    paths: &PathSet,
    n_rx: usize,
    n_tx: usize,
    f_d: f64,
    tau: f64,
) -> Result<ComplexMatrix> {
    let mut p = paths.clone();
    p.redraw_gains(rng);
    channel_matrix(&p, n_rx, n_tx, f_d, tau)
}

/// Linear power path loss `10^(C0/10) (d/D0)^(−β)`.
pub fn path_loss(distance: f64, beta: f64, c0_db: f64, d0: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(invalid(format!("link distance must be positive, got {distance}")));
    }
    if !(d0 > 0.0) {
        return Err(invalid("reference distance must be positive"));
    }
    Ok(10f64.powf(c0_db / 10.0) * (distance / d0).powf(-beta))
}

/// Positions (meters) and path-loss parameters of the three nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGeometry {
    pub bs: [f64; 3],
    pub user_a: [f64; 3],
    pub user_b: [f64; 3],
    /// Path-loss exponents of uplink, downlink and D2D.
    pub beta: [f64; 3],
    pub c0_db: f64,
    pub d0: f64,
}

impl LinkGeometry {
    /// BS at height `bs_height` above the origin; users at `(±d_x, d_y, user_height)`.
    pub fn symmetric(d_x: f64, d_y: f64, bs_height: f64, user_height: f64) -> Self {
        Self {
            bs: [0.0, 0.0, bs_height],
            user_a: [d_x, d_y, user_height],
            user_b: [-d_x, d_y, user_height],
            beta: [3.0, 3.0, 2.4],
            c0_db: -30.0,
            d0: 1.0,
        }
    }

    pub fn reference() -> Self {
        Self::symmetric(5.0, 50.0, 10.0, 1.0)
    }

    /// Uplink, downlink and D2D distances.
    pub fn distances(&self) -> [f64; 3] {
        let dist = |a: &[f64; 3], b: &[f64; 3]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        [
            dist(&self.bs, &self.user_a),
            dist(&self.bs, &self.user_b),
            dist(&self.user_a, &self.user_b),
        ]
    }

    pub fn path_losses(&self) -> Result<[f64; 3]> {
        let d = self.distances();
        Ok([
            path_loss(d[0], self.beta[0], self.c0_db, self.d0)?,
            path_loss(d[1], self.beta[1], self.c0_db, self.d0)?,
            path_loss(d[2], self.beta[2], self.c0_db, self.d0)?,
        ])
    }
}

/// Full channels of the three links including path loss.
///
/// `h1`: N×N_a (uplink), `h2`: N_b×N (downlink), `h3`: N_b×N_a (D2D).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTriple {
    pub h1: ComplexMatrix,
    pub h2: ComplexMatrix,
    pub h3: ComplexMatrix,
    pub path_loss: [f64; 3],
}

impl ChannelTriple {
    pub fn zeros(dims: &SystemDims) -> Self {
        Self {
            h1: ComplexMatrix::zeros(dims.n_bs, dims.n_a),
            h2: ComplexMatrix::zeros(dims.n_b, dims.n_bs),
            h3: ComplexMatrix::zeros(dims.n_b, dims.n_a),
            path_loss: [1.0; 3],
        }
    }
}

/// Time-varying multipath state of all three links.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProcess {
    pub links: [PathSet; 3],
    /// `(n_rx, n_tx)` of each link.
    pub shapes: [(usize, usize); 3],
    pub path_loss: [f64; 3],
    pub doppler_hz: f64,
    pub elapsed: f64,
}

impl ChannelProcess {
    pub fn draw<R: Rng + ?Sized>(
        rng: &mut R,
        dims: &SystemDims,
        profile: &PathProfile,
        path_loss: [f64; 3],
        doppler_hz: f64,
    ) -> Result<Self> {
        if !(doppler_hz >= 0.0) {
            return Err(invalid("Doppler shift must be non-negative"));
        }
        Ok(Self {
            links: [
                PathSet::draw(rng, profile)?,
                PathSet::draw(rng, profile)?,
                PathSet::draw(rng, profile)?,
            ],
            shapes: [(dims.n_bs, dims.n_a), (dims.n_b, dims.n_bs), (dims.n_b, dims.n_a)],
            path_loss,
            doppler_hz,
            elapsed: 0.0,
        })
    }

    pub fn redraw_gains<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for l in &mut self.links {
            l.redraw_gains(rng);
        }
    }

    /// Process state `dt ≥ 0` seconds later.
    pub fn evolve(&self, dt: f64) -> Result<Self> {
        if !(dt >= 0.0) {
            return Err(invalid(format!("elapsed time must be non-negative, got {dt}")));
        }
        let mut next = self.clone();
        if dt > 0.0 && self.doppler_hz > 0.0 {
            for l in &mut next.links {
                l.rotate(self.doppler_hz, dt);
            }
        }
        next.elapsed += dt;
        Ok(next)
    }

    pub fn channels(&self) -> Result<ChannelTriple> {
        let build = |k: usize| -> Result<ComplexMatrix> {
            let (r, t) = self.shapes[k];
            Ok(channel_matrix(&self.links[k], r, t, 0.0, 0.0)? * Complex64::new(self.path_loss[k].sqrt(), 0.0))
        };
        Ok(ChannelTriple {
            h1: build(0)?,
            h2: build(1)?,
            h3: build(2)?,
            path_loss: self.path_loss,
        })
    }
}

/// Effective channel `rx^H · H · tx`.
pub fn effective_channel(rx_analog: &ComplexMatrix, h: &ComplexMatrix, tx_analog: &ComplexMatrix) -> Result<ComplexMatrix> {
    if rx_analog.nrows() != h.nrows() || h.ncols() != tx_analog.nrows() {
        return Err(mismatch(
            "effective_channel",
            format!(
                "rx {}x{}, H {}x{}, tx {}x{}",
                rx_analog.nrows(),
                rx_analog.ncols(),
                h.nrows(),
                h.ncols(),
                tx_analog.nrows(),
                tx_analog.ncols()
            ),
        ));
    }
    Ok(rx_analog.adjoint() * h * tx_analog)
}
