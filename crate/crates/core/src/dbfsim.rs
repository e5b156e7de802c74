//! Post-beamforming SINR under Gaussian residual frequency or timing errors.
//!
//! Frequency errors decohere the transmitters linearly over a frame and are
//! evaluated at its end. Timing errors produce intersymbol interference
//! through a raised-cosine pulse, summed coherently across transmitters.
//! Trial SINRs are averaged in linear scale and reported in dB.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::sinc;
use crate::rng::{rng_for, Stream};

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbfScenario {
    pub n_t: usize,
    pub n_r: usize,
    pub snr_link_db: f64,
    pub frame_duration_s: f64,
    pub symbol_duration_s: f64,
    pub rms_freq_error_hz: f64,
    /// Units of the symbol duration.
    pub rms_timing_error_ts: f64,
    pub n_trials: usize,
    pub pulse_rolloff: f64,
    pub pulse_span_symbols: usize,
}

impl Default for DbfScenario {
    fn default() -> Self {
        Self {
            n_t: 8,
            n_r: 8,
            snr_link_db: -1.5,
            frame_duration_s: 5e-3,
            symbol_duration_s: 1e-6,
            rms_freq_error_hz: 0.0,
            rms_timing_error_ts: 0.0,
            n_trials: 100_000,
            pulse_rolloff: 0.25,
            pulse_span_symbols: 8,
        }
    }
}

impl DbfScenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_t == 0 || self.n_r == 0 {
            return bad(format!(
                "group sizes must be >= 1, got {}x{}",
                self.n_t, self.n_r
            ));
        }
        if self.n_trials == 0 {
            return bad("n_trials must be >= 1".into());
        }
        if !self.snr_link_db.is_finite() {
            return bad(format!("link SNR must be finite, got {}", self.snr_link_db));
        }
        for (name, v) in [
            ("frame duration", self.frame_duration_s),
            ("symbol duration", self.symbol_duration_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("rms frequency error", self.rms_freq_error_hz),
            ("rms timing error", self.rms_timing_error_ts),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.pulse_rolloff) {
            return bad(format!(
                "pulse rolloff must be in [0, 1], got {}",
                self.pulse_rolloff
            ));
        }
        if self.pulse_span_symbols == 0 {
            return bad("pulse span must be >= 1 symbol".into());
        }
        Ok(())
    }

    fn snr_link_linear(&self) -> f64 {
        10f64.powf(self.snr_link_db / 10.0)
    }

    /// SINR with perfect synchronization, `snr_link + 10 log10(n_t^2 n_r)`.
    pub fn ideal_sinr_db(&self) -> f64 {
        self.snr_link_db + 10.0 * ((self.n_t * self.n_t * self.n_r) as f64).log10()
    }
}

/// Raised-cosine pulse at `t` symbols. Exactly zero at nonzero integers.
pub fn raised_cosine(t: f64, rolloff: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if t.fract() == 0.0 {
        return 0.0;
    }
    let x = 2.0 * rolloff * t;
    if (x.abs() - 1.0).abs() < 1e-12 {
        return PI / 4.0 * sinc(1.0 / (2.0 * rolloff));
    }
    sinc(t) * (PI * rolloff * t).cos() / (1.0 - x * x)
}

/// Sums `trial` over `n_trials` draws in fixed chunks, each chunk with its own
/// position-derived stream, so the total does not depend on thread count.
fn mean_over_trials<F>(n_trials: usize, seed: u64, trial: F) -> f64
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync,
{
    let chunks = n_trials.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_for(seed, c as u64, Stream::MonteCarlo);
            let count = CHUNK.min(n_trials - c * CHUNK);
            (0..count).map(|_| trial(&mut rng)).sum::<f64>()
        })
        .collect();
    partial.iter().sum::<f64>() / n_trials as f64
}

/// Mean end-of-frame SINR (dB) with Gaussian per-transmitter CFO residuals.
pub fn sinr_freq_error(scn: &DbfScenario, seed: u64) -> Result<f64> {
    scn.validate()?;
    if scn.rms_timing_error_ts != 0.0 {
        return Err(Error::InvalidParameter(
            "frequency-error run needs zero timing error".into(),
        ));
    }
    let n_t = scn.n_t;
    let gain = scn.snr_link_linear() * (n_t * n_t * scn.n_r) as f64;
    let sigma = scn.rms_freq_error_hz;
    let t = scn.frame_duration_s;
    let mean = mean_over_trials(scn.n_trials, seed, |rng| {
        let mut acc = Complex64::new(0.0, 0.0);
        for _ in 0..n_t {
            let z: f64 = rng.sample(StandardNormal);
            acc += Complex64::from_polar(1.0, 2.0 * PI * sigma * z * t);
        }
        gain * acc.norm_sqr() / (n_t * n_t) as f64
    });
    Ok(10.0 * mean.log10())
}

/// Mean SINR (dB) with Gaussian per-transmitter timing residuals.
pub fn sinr_timing_error(scn: &DbfScenario, seed: u64) -> Result<f64> {
    scn.validate()?;
    if scn.rms_freq_error_hz != 0.0 {
        return Err(Error::InvalidParameter(
            "timing-error run needs zero frequency error".into(),
        ));
    }
    let s = scn.snr_link_linear() * scn.n_r as f64;
    let span = scn.pulse_span_symbols as i64;
    let (n_t, sigma, beta) = (scn.n_t, scn.rms_timing_error_ts, scn.pulse_rolloff);
    let mean = mean_over_trials(scn.n_trials, seed, |rng| {
        let mut taps = vec![0.0f64; (2 * span + 1) as usize];
        for _ in 0..n_t {
            let z: f64 = rng.sample(StandardNormal);
            let eps = sigma * z;
            for (tap, k) in taps.iter_mut().zip(-span..=span) {
                *tap += raised_cosine(k as f64 - eps, beta);
            }
        }
        let main = taps[span as usize].powi(2);
        let isi: f64 = taps.iter().map(|c| c * c).sum::<f64>() - main;
        s * main / (s * isi + 1.0)
    });
    Ok(10.0 * mean.log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Freq,
    Timing,
}

impl ErrorKind {
    pub fn name(&self) -> &'static str {
        match self {
            ErrorKind::Freq => "freq",
            ErrorKind::Timing => "timing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n_t: usize,
    pub n_r: usize,
    /// Hz for frequency sweeps, Ts for timing sweeps.
    pub error_level: f64,
    pub mean_sinr_db: f64,
    pub trials: usize,
}

/// Evaluates every `(group size, error level)` cell with the same seed.
pub fn sweep_requirements(
    base: &DbfScenario,
    group_sizes: &[(usize, usize)],
    error_levels: &[f64],
    kind: ErrorKind,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if group_sizes.is_empty() || error_levels.is_empty() {
        return Err(Error::InvalidParameter(
            "sweep needs at least one group size and one error level".into(),
        ));
    }
    let mut rows = Vec::with_capacity(group_sizes.len() * error_levels.len());
    for &(n_t, n_r) in group_sizes {
        for &level in error_levels {
            let mut scn = DbfScenario { n_t, n_r, ..*base };
            let mean_sinr_db = match kind {
                ErrorKind::Freq => {
                    scn.rms_freq_error_hz = level;
                    scn.rms_timing_error_ts = 0.0;
                    sinr_freq_error(&scn, seed)?
                }
                ErrorKind::Timing => {
                    scn.rms_freq_error_hz = 0.0;
                    scn.rms_timing_error_ts = level;
                    sinr_timing_error(&scn, seed)?
                }
            };
            rows.push(SweepRow {
                n_t,
                n_r,
                error_level: level,
                mean_sinr_db,
                trials: scn.n_trials,
            });
        }
    }
    Ok(rows)
}

/// Columns `n_t,n_r,error_level,mean_sinr_db,trials`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n_t", "n_r", "error_level", "mean_sinr_db", "trials"])?;
    for r in rows {
        w.write_record(&[
            r.n_t.to_string(),
            r.n_r.to_string(),
            r.error_level.to_string(),
            r.mean_sinr_db.to_string(),
            r.trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(trials: usize) -> DbfScenario {
        DbfScenario {
            n_trials: trials,
            ..DbfScenario::default()
        }
    }

    #[test]
    fn zero_error_identity() {
        let scn = scenario(1000);
        let ideal = -1.5 + 10.0 * 512f64.log10();
        assert!((scn.ideal_sinr_db() - ideal).abs() < 1e-12);
        assert!((sinr_freq_error(&scn, 1).unwrap() - ideal).abs() < 1e-9);
        assert!((sinr_timing_error(&scn, 1).unwrap() - ideal).abs() < 1e-9);
        assert!((ideal - 25.59).abs() < 0.01);
    }

    #[test]
    fn single_transmitter_ignores_frequency_error() {
        let scn = DbfScenario {
            n_t: 1,
            rms_freq_error_hz: 300.0,
            ..scenario(500)
        };
        assert!((sinr_freq_error(&scn, 4).unwrap() - scn.ideal_sinr_db()).abs() < 1e-9);
    }

    #[test]
    fn raised_cosine_properties() {
        for k in 1..10 {
            assert_eq!(raised_cosine(k as f64, 0.25), 0.0);
            assert_eq!(raised_cosine(-(k as f64), 0.25), 0.0);
        }
        assert_eq!(raised_cosine(0.0, 0.25), 1.0);
        let t = 1.0 / (2.0 * 0.3);
        let near = sinc(t + 1e-7) * (PI * 0.3 * (t + 1e-7)).cos()
            / (1.0 - (2.0 * 0.3 * (t + 1e-7)).powi(2));
        assert!((raised_cosine(t, 0.3) - near).abs() < 1e-5);
        assert!((raised_cosine(0.37, 0.25) - raised_cosine(-0.37, 0.25)).abs() < 1e-15);
    }

    #[test]
    fn wrong_error_kind_rejected() {
        let scn = DbfScenario {
            rms_timing_error_ts: 0.1,
            ..scenario(10)
        };
        assert!(sinr_freq_error(&scn, 0).is_err());
        let scn = DbfScenario {
            rms_freq_error_hz: 1.0,
            ..scenario(10)
        };
        assert!(sinr_timing_error(&scn, 0).is_err());
        assert!(sinr_timing_error(
            &DbfScenario {
                n_t: 0,
                ..scenario(10)
            },
            0
        )
        .is_err());
    }

    #[test]
    fn thresholds_for_eight_by_eight() {
        let f = DbfScenario {
            rms_freq_error_hz: 20.0,
            ..scenario(20_000)
        };
        assert!(sinr_freq_error(&f, 9).unwrap() >= 20.0);
        let t = DbfScenario {
            rms_timing_error_ts: 0.125,
            ..scenario(20_000)
        };
        assert!(sinr_timing_error(&t, 9).unwrap() >= 20.0);
    }

    #[test]
    fn timing_half_symbol_worse_than_eighth() {
        let eighth = DbfScenario {
            rms_timing_error_ts: 0.125,
            ..scenario(20_000)
        };
        let half = DbfScenario {
            rms_timing_error_ts: 0.5,
            ..eighth
        };
        assert!(sinr_timing_error(&half, 3).unwrap() < sinr_timing_error(&eighth, 3).unwrap());
    }

    #[test]
    fn sweeps_are_monotone_in_error() {
        let base = scenario(20_000);
        let groups = [(2, 2), (4, 4), (8, 8)];
        let freq = sweep_requirements(
            &base,
            &groups,
            &[0.0, 10.0, 20.0, 40.0, 80.0],
            ErrorKind::Freq,
            5,
        )
        .unwrap();
        let timing = sweep_requirements(
            &base,
            &groups,
            &[0.0, 0.0625, 0.125, 0.25, 0.5],
            ErrorKind::Timing,
            5,
        )
        .unwrap();
        for rows in [&freq, &timing] {
            for pair in rows.windows(2) {
                if (pair[0].n_t, pair[0].n_r) == (pair[1].n_t, pair[1].n_r) {
                    assert!(
                        pair[1].mean_sinr_db <= pair[0].mean_sinr_db + 1e-12,
                        "{pair:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_error_sweep_matches_closed_form() {
        let base = scenario(200);
        let rows = sweep_requirements(
            &base,
            &[(2, 2), (4, 4), (8, 8)],
            &[0.0],
            ErrorKind::Timing,
            0,
        )
        .unwrap();
        for r in rows {
            let closed = -1.5 + 10.0 * ((r.n_t * r.n_t * r.n_r) as f64).log10();
            assert!((r.mean_sinr_db - closed).abs() < 1e-9);
        }
    }

    #[test]
    fn single_cell_sweep_matches_direct_call() {
        let base = scenario(5000);
        let rows = sweep_requirements(&base, &[(8, 8)], &[20.0], ErrorKind::Freq, 42).unwrap();
        let direct = sinr_freq_error(
            &DbfScenario {
                rms_freq_error_hz: 20.0,
                ..base
            },
            42,
        )
        .unwrap();
        assert_eq!(rows[0].mean_sinr_db.to_bits(), direct.to_bits());
        assert!(sweep_requirements(&base, &[], &[1.0], ErrorKind::Freq, 0).is_err());
    }

    #[test]
    fn seeded_runs_repeat_bitwise() {
        let scn = DbfScenario {
            rms_timing_error_ts: 0.2,
            ..scenario(10_000)
        };
        let a = sinr_timing_error(&scn, 11).unwrap();
        let b = sinr_timing_error(&scn, 11).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn doubling_trials_converges() {
        let f = DbfScenario {
            rms_freq_error_hz: 20.0,
            ..scenario(100_000)
        };
        let f2 = DbfScenario {
            n_trials: 200_000,
            ..f
        };
        assert!((sinr_freq_error(&f, 1).unwrap() - sinr_freq_error(&f2, 2).unwrap()).abs() <= 0.1);
        let t = DbfScenario {
            rms_timing_error_ts: 0.125,
            ..scenario(100_000)
        };
        let t2 = DbfScenario {
            n_trials: 200_000,
            ..t
        };
        assert!(
            (sinr_timing_error(&t, 1).unwrap() - sinr_timing_error(&t2, 2).unwrap()).abs() <= 0.1
        );
    }

    #[test]
    fn sweep_csv_layout() {
        let rows = [SweepRow {
            n_t: 2,
            n_r: 3,
            error_level: 0.5,
            mean_sinr_db: 10.25,
            trials: 7,
        }];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "n_t,n_r,error_level,mean_sinr_db,trials\n2,3,0.5,10.25,7\n"
        );
    }
}
