//! Shared system dimensions, unit conversions, seeded random streams and
//! analog phase quantization.

use std::f64::consts::TAU;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type RealMatrix = DMatrix<f64>;

/// Antenna, RF-chain and stream counts of the BS and the two users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDims {
    /// BS antennas.
    pub n_bs: usize,
    /// User A antennas.
    pub n_a: usize,
    /// User B antennas.
    pub n_b: usize,
    /// BS RF chains.
    pub n_rf: usize,
    /// User A RF chains.
    pub n_rfa: usize,
    /// User B RF chains.
    pub n_rfb: usize,
    /// Uplink streams.
    pub d1: usize,
    /// Downlink streams.
    pub d2: usize,
    /// D2D streams.
    pub d3: usize,
}

impl SystemDims {
    /// Builds dimensions with the stream counts fixed by the min rule.
    pub fn new(n_bs: usize, n_a: usize, n_b: usize, n_rf: usize, n_rfa: usize, n_rfb: usize) -> Self {
        Self {
            n_bs,
            n_a,
            n_b,
            n_rf,
            n_rfa,
            n_rfb,
            d1: n_rfa.min(n_rf),
            d2: n_rf.min(n_rfb),
            d3: n_rfa.min(n_rfb),
        }
    }

    /// 64-antenna BS with 4 RF chains, 8-antenna users with 2 RF chains each.
    pub fn reference() -> Self {
        Self::new(64, 8, 8, 4, 2, 2)
    }

    /// Reduced dimensions for quick desk-side runs.
    pub fn desk_scale() -> Self {
        Self::new(16, 4, 4, 4, 2, 2)
    }
}

/// A single violated invariant of [`SystemDims`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DimViolation {
    NotPositive(&'static str),
    RfExceedsAntennas { rf: &'static str, antennas: &'static str },
    StreamRule { stream: &'static str, expected: usize, actual: usize },
}

impl fmt::Display for DimViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DimViolation::NotPositive(name) => write!(f, "{name} > 0"),
            DimViolation::RfExceedsAntennas { rf, antennas } => write!(f, "{rf} ≤ {antennas}"),
            DimViolation::StreamRule {
                stream,
                expected,
                actual,
            } => write!(f, "{stream} = min(...): expected {expected}, got {actual}"),
        }
    }
}

/// Lists every violated invariant; an empty list means the dimensions are valid.
pub fn validate_dims(dims: &SystemDims) -> Vec<DimViolation> {
    let mut out = Vec::new();
    let counts = [
        ("N", dims.n_bs),
        ("N_a", dims.n_a),
        ("N_b", dims.n_b),
        ("N_rf", dims.n_rf),
        ("N_rfa", dims.n_rfa),
        ("N_rfb", dims.n_rfb),
        ("d1", dims.d1),
        ("d2", dims.d2),
        ("d3", dims.d3),
    ];
    for (name, v) in counts {
        if v == 0 {
            out.push(DimViolation::NotPositive(name));
        }
    }
    for (rf, rf_v, ant, ant_v) in [
        ("N_rf", dims.n_rf, "N", dims.n_bs),
        ("N_rfa", dims.n_rfa, "N_a", dims.n_a),
        ("N_rfb", dims.n_rfb, "N_b", dims.n_b),
    ] {
        if rf_v > ant_v {
            out.push(DimViolation::RfExceedsAntennas { rf, antennas: ant });
        }
    }
    for (stream, actual, expected) in [
        ("d1", dims.d1, dims.n_rfa.min(dims.n_rf)),
        ("d2", dims.d2, dims.n_rf.min(dims.n_rfb)),
        ("d3", dims.d3, dims.n_rfa.min(dims.n_rfb)),
    ] {
        if actual != expected {
            out.push(DimViolation::StreamRule {
                stream,
                expected,
                actual,
            });
        }
    }
    out
}

/// Reference level of a decibel value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DbScale {
    /// Plain power ratio (dB).
    PowerRatio,
    /// Absolute power referenced to one milliwatt (dBm); result in watt.
    Milliwatt,
}

pub fn db_to_linear(x_db: f64, scale: DbScale) -> Result<f64> {
    if !x_db.is_finite() {
        return Err(invalid(format!("non-finite decibel value {x_db}")));
    }
    let ratio = 10f64.powf(x_db / 10.0);
    Ok(match scale {
        DbScale::PowerRatio => ratio,
        DbScale::Milliwatt => ratio * 1e-3,
    })
}

pub fn linear_to_db(x: f64, scale: DbScale) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(invalid(format!("cannot express {x} in decibels")));
    }
    Ok(match scale {
        DbScale::PowerRatio => 10.0 * x.log10(),
        DbScale::Milliwatt => 10.0 * (x * 1e3).log10(),
    })
}

/// Maps every phase to the nearest point of the uniform `2^bits` grid on `[0, 2π)`.
pub fn quantize_phases(theta: &RealMatrix, bits: u32) -> Result<RealMatrix> {
    if bits == 0 || bits > 52 {
        return Err(invalid(format!("phase bits must be in 1..=52, got {bits}")));
    }
    let levels = 1u64 << bits;
    let step = TAU / levels as f64;
    Ok(theta.map(|t| {
        let k = (t.rem_euclid(TAU) / step).round() as u64 % levels;
        k as f64 * step
    }))
}

/// Purpose tags mixed into stream identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    AnalogInit = 1,
    Angles = 2,
    Gains = 3,
    Instance = 4,
}

/// A reproducible random stream: identical `(seed, stream)` pairs give identical draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Stream id derived from a path of indices (trial, super frame, frame, purpose, ...).
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        let mut h = 0x6a09_e667_f3bc_c908u64;
        for &p in path {
            h = splitmix64(h ^ p.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        }
        Self::new(seed, h)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
