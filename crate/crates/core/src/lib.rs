//! Two-timescale hybrid beamforming and partial task offloading for a
//! mmWave device-to-device edge-computing system.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod checks;
pub mod error;
pub mod harness;
pub mod latency;
pub mod linalg;
pub mod offload;
pub mod pa;
pub mod pcccp;
pub mod rate;
pub mod ssca;
pub mod system;

pub use error::{Error, Result};
pub use system::{ComplexMatrix, RealMatrix, SystemDims};
