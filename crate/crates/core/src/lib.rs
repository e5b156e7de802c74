//! Joint carrier-frequency and sample-timing synchronization for
//! master/slave radio arrays, simulated end to end in software.
//!
//! The master transmits a preamble of repeated Zadoff-Chu blocks. The slave
//! detects it, estimates integer delay and CFO, tracks phase and CFO across
//! frames with an EKF, and refines timing with a bank of fractionally delayed
//! replicas. [`bounds`] gives the matching CRLBs and [`dbfsim`] the beamforming
//! SINR that residual errors allow.

pub mod bounds;
pub mod channel;
pub mod dbfsim;
pub mod error;
pub mod harness;
pub mod iq;
pub mod kernel;
pub mod preamble;
pub mod receiver;
pub mod rng;
pub mod signal;

pub use error::{Error, Result};
pub use kernel::InterpolationKernel;
pub use preamble::PreambleSpec;
pub use signal::ComplexSignal;
