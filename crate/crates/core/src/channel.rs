//! Slave-side impairment model: fractional-sample delay through the pulse
//! shape, carrier frequency offset rotation, complex gain and AWGN.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kernel::InterpolationKernel;
use crate::preamble::PreambleSpec;
use crate::signal::ComplexSignal;

/// Ground-truth offsets injected by the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpairmentParams {
    /// Carrier frequency offset, Hz.
    pub cfo_hz: f64,
    /// Sample timing offset, seconds. Includes propagation delay.
    pub sto_seconds: f64,
    pub gain: Complex64,
    /// Variance of the circular complex Gaussian noise.
    pub noise_power: f64,
    /// Sample duration, seconds.
    pub sample_duration: f64,
}

impl ImpairmentParams {
    /// Noiseless identity channel.
    pub fn identity(sample_duration: f64) -> Self {
        Self {
            cfo_hz: 0.0,
            sto_seconds: 0.0,
            gain: Complex64::new(1.0, 0.0),
            noise_power: 0.0,
            sample_duration,
        }
    }

    /// Sets the noise power so that `|gain|^2 / noise_power` equals `snr_db`.
    /// `f64::INFINITY` gives a noiseless channel.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.noise_power = self.gain.norm_sqr() / 10f64.powf(snr_db / 10.0);
        self
    }

    /// `2 pi cfo Ts`, rad/sample.
    pub fn normalized_cfo(&self) -> f64 {
        2.0 * PI * self.cfo_hz * self.sample_duration
    }

    /// Timing offset in units of the sample duration.
    pub fn sto_samples(&self) -> f64 {
        self.sto_seconds / self.sample_duration
    }

    /// Integer part of the timing offset, `floor(sto / Ts)`.
    pub fn integer_delay(&self) -> usize {
        self.sto_samples().floor() as usize
    }

    /// Fractional part of the timing offset, in `[0, 1)`.
    pub fn fractional_delay(&self) -> f64 {
        let s = self.sto_samples();
        s - s.floor()
    }

    /// `|gain|^2 / noise_power`; infinite for a noiseless channel.
    pub fn snr_sync(&self) -> f64 {
        self.gain.norm_sqr() / self.noise_power
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.cfo_hz,
            self.sto_seconds,
            self.noise_power,
            self.gain.re,
            self.gain.im,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(
                "impairment parameters must be finite".into(),
            ));
        }
        if !(self.sample_duration.is_finite() && self.sample_duration > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample duration must be positive, got {}",
                self.sample_duration
            )));
        }
        if self.noise_power < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise power must be non-negative, got {}",
                self.noise_power
            )));
        }
        if self.sto_seconds < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "timing offset must be non-negative, got {} s",
                self.sto_seconds
            )));
        }
        if self.normalized_cfo().abs() >= PI {
            return Err(Error::InvalidParameter(format!(
                "normalized CFO {} rad/sample aliases",
                self.normalized_cfo()
            )));
        }
        Ok(())
    }

    /// Additionally checks that the CFO phase advance over one ZC period stays
    /// below a full turn, which the repetition-based CFO estimator requires.
    pub fn validate_for(&self, spec: &PreambleSpec) -> Result<()> {
        self.validate()?;
        let turn = self.normalized_cfo().abs() * spec.n_zc() as f64;
        if turn >= 2.0 * PI {
            return Err(Error::InvalidParameter(format!(
                "CFO of {} Hz rotates {turn:.3} rad per {}-sample period (must stay below 2 pi)",
                self.cfo_hz,
                spec.n_zc()
            )));
        }
        Ok(())
    }
}

/// Delays `tx` by `delay` samples with `kernel`, producing `out_len` samples.
/// Samples of `tx` outside `0..tx.len()` are zero.
pub fn fractional_delay(
    tx: &[Complex64],
    delay: f64,
    kernel: &InterpolationKernel,
    out_len: usize,
) -> Vec<Complex64> {
    let span = kernel.half_span() as f64;
    let last = tx.len() as i64 - 1;
    (0..out_len)
        .map(|n| {
            let center = n as f64 - delay;
            let lo = ((center - span).floor() as i64).max(0);
            let hi = ((center + span).ceil() as i64).min(last);
            (lo..=hi)
                .map(|k| tx[k as usize] * kernel.eval(center - k as f64))
                .sum()
        })
        .collect()
}

/// Adds circular complex Gaussian noise of variance `noise_power` in place.
pub fn add_awgn<R: Rng>(samples: &mut [Complex64], noise_power: f64, rng: &mut R) {
    if noise_power == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, (noise_power / 2.0).sqrt()).expect("finite sigma");
    for s in samples.iter_mut() {
        *s += Complex64::new(normal.sample(rng), normal.sample(rng));
    }
}

/// Produces the received stream
/// `r[n] = h0 e^{j eps n} sum_k tx[k] p((n-k) Ts - sto) + w[n]`
/// of length `tx.len() + pad`. Noise is drawn from a generator seeded with
/// `seed`, so identical inputs give bit-identical outputs.
pub fn apply_impairments(
    tx: &ComplexSignal,
    params: &ImpairmentParams,
    kernel: &InterpolationKernel,
    seed: u64,
    pad: usize,
) -> Result<ComplexSignal> {
    params.validate()?;
    if tx.is_empty() {
        return Err(Error::InvalidParameter("transmit signal is empty".into()));
    }
    let rel = (tx.sample_duration() - params.sample_duration).abs() / params.sample_duration;
    if rel > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "signal sample duration {} s does not match channel {} s",
            tx.sample_duration(),
            params.sample_duration
        )));
    }
    let delay = params.sto_samples();
    let min_pad = kernel.half_span() + delay.ceil() as usize;
    if pad < min_pad {
        return Err(Error::InvalidParameter(format!(
            "pad of {pad} samples cannot hold a {delay:.3}-sample delay (need {min_pad})"
        )));
    }

    let out_len = tx.len() + pad;
    let mut out = fractional_delay(tx.samples(), delay, kernel, out_len);
    let eps = params.normalized_cfo();
    for (n, s) in out.iter_mut().enumerate() {
        *s *= params.gain * Complex64::from_polar(1.0, eps * n as f64);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    add_awgn(&mut out, params.noise_power, &mut rng);
    ComplexSignal::new(out, params.sample_duration)
}

/// Minimum noise-only capture length accepted by [`estimate_noise_power`].
pub const MIN_NOISE_SAMPLES: usize = 100;

/// Mean squared magnitude of a noise-only capture.
pub fn estimate_noise_power(noise_only: &[Complex64]) -> Result<f64> {
    if noise_only.len() < MIN_NOISE_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "noise estimate needs at least {MIN_NOISE_SAMPLES} samples, got {}",
            noise_only.len()
        )));
    }
    Ok(noise_only.iter().map(|s| s.norm_sqr()).sum::<f64>() / noise_only.len() as f64)
}

/// One random-walk step of the oscillator offset: adds a zero-mean Gaussian
/// increment with standard deviation `drift_rate_hz_per_s * dt`.
///
/// Panics if `dt` is not positive.
pub fn oscillator_drift_step<R: Rng>(
    current_cfo_hz: f64,
    drift_rate_hz_per_s: f64,
    dt: f64,
    rng: &mut R,
) -> f64 {
    assert!(dt > 0.0, "drift step needs dt > 0, got {dt}");
    let sigma = (drift_rate_hz_per_s * dt).abs();
    if sigma == 0.0 {
        return current_cfo_hz;
    }
    let z: f64 = rand_distr::StandardNormal.sample(rng);
    current_cfo_hz + sigma * z
}
