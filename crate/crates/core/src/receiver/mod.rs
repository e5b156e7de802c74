//! The slave's estimation chain: preamble detection and integer timing,
//! one-shot CFO, EKF tracking of phase and CFO, CFO compensation, and
//! fractional timing from a bank of delayed replicas.
//!
//! Per detected preamble the chain costs `M * N_zc` complex MACs per sample
//! for the correlator, `(M-1) * N_zc` MACs plus one angle for the CFO, and
//! `M * N_zc` MACs per dictionary entry for the fractional search.

mod cfo;
mod detector;
mod ekf;
mod sync;
mod timing;

pub use cfo::{compensate_cfo, estimate_cfo_oneshot};
pub use detector::{
    correlation_trace, detect_and_integer_delay, detection_statistic, gamma_threshold,
    trigger_mask, write_trace_csv, Detection, DetectorConfig,
};
pub use ekf::{ekf_predict, ekf_update, wrap_phase, EkfMeasurement, EkfNoise, EkfState};
pub use sync::{synchronize, SyncConfig, SyncEstimate, SyncOutcome, SyncSolution, Tracking};
pub use timing::{estimate_fractional_delay, replica_metrics};
