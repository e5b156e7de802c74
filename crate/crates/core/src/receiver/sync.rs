use crate::error::Result;
use crate::kernel::InterpolationKernel;
use crate::preamble::{delayed_zc_dictionary, PreambleSpec, ReplicaDictionary};
use crate::signal::ComplexSignal;

use super::cfo::{compensate_cfo, estimate_cfo_oneshot};
use super::detector::{detect_and_integer_delay, DetectorConfig};
use super::ekf::{EkfMeasurement, EkfNoise, EkfState};
use super::timing::estimate_fractional_delay;

/// Everything the receiver needs besides the samples.
#[derive(Debug, Clone)]
pub struct SyncConfig {
    pub spec: PreambleSpec,
    pub detector: DetectorConfig,
    pub dictionary: ReplicaDictionary,
    pub ekf_noise: EkfNoise,
    pub apply_phase: bool,
}

impl SyncConfig {
    pub fn new(
        spec: PreambleSpec,
        detector: DetectorConfig,
        n_zeta: usize,
        kernel: InterpolationKernel,
        ekf_noise: EkfNoise,
    ) -> Result<Self> {
        detector.validate()?;
        ekf_noise.validate()?;
        let dictionary = delayed_zc_dictionary(&spec, n_zeta, kernel)?;
        Ok(Self {
            spec,
            detector,
            dictionary,
            ekf_noise,
            apply_phase: false,
        })
    }
}

/// Tracking input: the state after the previous preamble (`None` starts a
/// new track) and the sample count since that preamble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tracking {
    pub prior: Option<EkfState>,
    pub n_cyc: u64,
}

/// Estimates for one detected preamble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncSolution {
    pub d_hat: usize,
    /// Units of Ts, on the dictionary grid.
    pub zeta_hat: f64,
    /// CFO used for compensation (filtered when tracking), rad/sample.
    pub eps_f_hat: f64,
    pub eps_f_oneshot: f64,
    pub phi_hat: f64,
    pub peak_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyncEstimate {
    Missed { peak_value: f64 },
    Locked(SyncSolution),
}

impl SyncEstimate {
    pub fn detected(&self) -> bool {
        matches!(self, SyncEstimate::Locked(_))
    }

    pub fn solution(&self) -> Option<&SyncSolution> {
        match self {
            SyncEstimate::Locked(s) => Some(s),
            SyncEstimate::Missed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncOutcome {
    pub estimate: SyncEstimate,
    /// Updated track; equal to the prior when nothing was detected, `None`
    /// when not tracking.
    pub ekf: Option<EkfState>,
}

/// Detect, estimate CFO, update the tracker, compensate, then search the
/// fractional delay.
pub fn synchronize(
    r: &ComplexSignal,
    cfg: &SyncConfig,
    tracking: Option<Tracking>,
    noise_power: f64,
) -> Result<SyncOutcome> {
    let spec = &cfg.spec;
    let detection = detect_and_integer_delay(r.samples(), spec, &cfg.detector, noise_power)?;
    let Some(d_hat) = detection.d_hat else {
        return Ok(SyncOutcome {
            estimate: SyncEstimate::Missed {
                peak_value: detection.peak,
            },
            ekf: tracking.and_then(|t| t.prior),
        });
    };

    let eps_oneshot = estimate_cfo_oneshot(r.samples(), d_hat, spec)?;
    let anchor = r.samples()[d_hat];
    let (eps_f_hat, phi_hat, ekf) = match tracking {
        None => (eps_oneshot, anchor.arg(), None),
        Some(t) => {
            let z = EkfMeasurement::from_sample(anchor, eps_oneshot)?;
            let state = match t.prior {
                None => EkfState::initialize(&z, &cfg.ekf_noise)?,
                Some(prior) => prior.predict(t.n_cyc).update(&z)?,
            };
            (state.eps_f, state.phi, Some(state))
        }
    };

    let r_tilde = compensate_cfo(r, eps_f_hat, phi_hat, cfg.apply_phase);
    let zeta_hat = estimate_fractional_delay(r_tilde.samples(), d_hat, spec, &cfg.dictionary)?;
    Ok(SyncOutcome {
        estimate: SyncEstimate::Locked(SyncSolution {
            d_hat,
            zeta_hat,
            eps_f_hat,
            eps_f_oneshot: eps_oneshot,
            phi_hat,
            peak_value: detection.peak,
        }),
        ekf,
    })
}
