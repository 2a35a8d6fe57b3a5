//! Link rates and per-sample capacities of the hybrid-beamformed links.
//!
//! All three links share one determinant form. With receive analog matrix `A`,
//! transmit analog matrix `F`, channel `H` and digital precoder `W`:
//!
//! ```text
//! R = B log2 det[I + (1/σ²) A^H H F W W^H F^H H^H A (A^H A)^{-1}]
//! ```
//!
//! The uplink uses `(A, F, W) = (U1, F_a, W_a1)`, the downlink `(F_b, U2, V2)`
//! and the D2D link `(F_b, F_a, W_a3)`.

use std::f64::consts::LN_2;

use crate::error::{invalid, mismatch, Error, Result};
use crate::linalg::{cholesky, identity, logdet_hpd};
use crate::system::ComplexMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Bandwidth (Hz).
    pub bandwidth: f64,
    /// Noise power (watt).
    pub noise: f64,
}

impl LinkParams {
    pub fn new(bandwidth: f64, noise: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && noise > 0.0) {
            return Err(invalid("bandwidth and noise power must be positive"));
        }
        Ok(Self { bandwidth, noise })
    }
}

fn check_shapes(op: &'static str, rx: &ComplexMatrix, h: &ComplexMatrix, tx: &ComplexMatrix) -> Result<()> {
    if rx.nrows() != h.nrows() || h.ncols() != tx.nrows() {
        return Err(mismatch(
            op,
            format!(
                "rx {}x{}, H {}x{}, tx {}x{}",
                rx.nrows(),
                rx.ncols(),
                h.nrows(),
                h.ncols(),
                tx.nrows(),
                tx.ncols()
            ),
        ));
    }
    Ok(())
}

/// `log2 det[I + (1/σ²) X X^H (A^H A)^{-1}]` with `X = A^H H F W` (or `A^H H F`).
fn whitened_logdet2(rx: &ComplexMatrix, x: &ComplexMatrix, noise: f64) -> Result<f64> {
    let chol = cholesky(&(rx.adjoint() * rx)).ok_or_else(|| Error::RankDeficient("receive analog Gram matrix is singular".into()))?;
    // det(I + X X^H G^{-1}) = det(I + L^{-1} X X^H L^{-H})
    let mut m = x.clone();
    chol.l_dirty().solve_lower_triangular_mut(&mut m);
    let k = m.ncols();
    let inner = identity(k) + (m.adjoint() * &m).map(|z| z / noise);
    Ok(logdet_hpd(&inner)? / LN_2)
}

/// Achievable rate (bits/s) of one link with digital precoder `w`.
pub fn link_rate(
    rx_analog: &ComplexMatrix,
    h: &ComplexMatrix,
    tx_analog: &ComplexMatrix,
    w: &ComplexMatrix,
    params: &LinkParams,
) -> Result<f64> {
    check_shapes("link_rate", rx_analog, h, tx_analog)?;
    if tx_analog.ncols() != w.nrows() {
        return Err(mismatch("link_rate", "precoder rows must match transmit RF chains"));
    }
    let x = rx_analog.adjoint() * h * tx_analog * w;
    Ok(params.bandwidth * whitened_logdet2(rx_analog, &x, params.noise)?.max(0.0))
}

/// Per-sample capacity (bits/s/Hz) with the digital precoder replaced by the identity.
pub fn link_capacity(rx_analog: &ComplexMatrix, h: &ComplexMatrix, tx_analog: &ComplexMatrix, noise: f64) -> Result<f64> {
    check_shapes("link_capacity", rx_analog, h, tx_analog)?;
    let x = rx_analog.adjoint() * h * tx_analog;
    Ok(whitened_logdet2(rx_analog, &x, noise)?.max(0.0))
}
