//! Cramér-Rao lower bounds for one-shot CFO and STO estimation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::preamble::PreambleSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrlbInputs {
    t_est: f64,
    snr_sync: f64,
    ts: f64,
}

impl CrlbInputs {
    /// `t_est` and `ts` in seconds, `snr_sync` linear.
    pub fn new(t_est: f64, snr_sync: f64, ts: f64) -> Result<Self> {
        for (name, v) in [("t_est", t_est), ("snr_sync", snr_sync), ("ts", ts)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            t_est,
            snr_sync,
            ts,
        })
    }

    /// Observation window of a whole preamble, `M * N_zc * ts`.
    pub fn for_preamble(spec: &PreambleSpec, ts: f64, snr_sync: f64) -> Result<Self> {
        Self::new(spec.len() as f64 * ts, snr_sync, ts)
    }

    pub fn t_est(&self) -> f64 {
        self.t_est
    }

    pub fn snr_sync(&self) -> f64 {
        self.snr_sync
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }
}

/// `3 / (2 pi^2 T^2 SNR)`, in Hz^2.
pub fn crlb_cfo_variance(inputs: &CrlbInputs) -> f64 {
    3.0 / (2.0 * PI * PI * inputs.t_est.powi(2) * inputs.snr_sync)
}

/// `12 pi Ts^3 / (T SNR)`, in s^2.
pub fn crlb_sto_variance(inputs: &CrlbInputs) -> f64 {
    12.0 * PI * inputs.ts.powi(3) / (inputs.t_est * inputs.snr_sync)
}
