use std::io::Write;

use num_complex::Complex64;
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{Error, Result};
use crate::preamble::{zc_sequence, PreambleSpec};

/// Threshold rule for the correlation statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorConfig {
    /// Trigger when the statistic exceeds `factor` times the mean of the
    /// previous `window` statistic values. Before any history exists the
    /// reference is zero, so the first positive value triggers.
    CfarMovingAverage { factor: f64, window: usize },
    /// Trigger above the upper `target_pfa` quantile of the statistic's
    /// null distribution under AWGN of known power.
    NoiseFloorGamma { target_pfa: f64 },
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig::CfarMovingAverage {
            factor: 10.0,
            window: 1000,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DetectorConfig::CfarMovingAverage { factor, window } => {
                if !(factor > 1.0 && factor.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "CFAR factor must exceed 1, got {factor}"
                    )));
                }
                if window == 0 {
                    return Err(Error::InvalidParameter(
                        "CFAR window must be positive".into(),
                    ));
                }
            }
            DetectorConfig::NoiseFloorGamma { target_pfa } => {
                if !(target_pfa > 0.0 && target_pfa < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "target false-alarm probability must be in (0, 1), got {target_pfa}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `y[n] = sum_m |sum_k s_zc[k] conj(r[n + k + m N_zc])|^2`, evaluated directly.
pub fn detection_statistic(r: &[Complex64], spec: &PreambleSpec, n: usize) -> Result<f64> {
    let needed = n + spec.len();
    if needed > r.len() {
        return Err(Error::OutOfRange {
            index: n,
            needed,
            available: r.len(),
        });
    }
    let zc = zc_sequence(spec);
    let n_zc = spec.n_zc();
    Ok((0..spec.m_reps())
        .map(|m| {
            let start = n + m * n_zc;
            zc.iter()
                .zip(&r[start..start + n_zc])
                .map(|(s, x)| s * x.conj())
                .sum::<Complex64>()
                .norm_sqr()
        })
        .sum())
}

/// The statistic for every `n` in `0..=r.len() - M N_zc` (empty when `r` is
/// shorter than one preamble). Each length-`N_zc` correlation is computed
/// once and reused by the `M` windows that contain it.
pub fn correlation_trace(r: &[Complex64], spec: &PreambleSpec) -> Vec<f64> {
    let n_zc = spec.n_zc();
    if r.len() < spec.len() {
        return Vec::new();
    }
    let zc = zc_sequence(spec);
    let matched: Vec<f64> = r
        .windows(n_zc)
        .map(|w| {
            zc.iter()
                .zip(w)
                .map(|(s, x)| s * x.conj())
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect();
    (0..=r.len() - spec.len())
        .map(|n| (0..spec.m_reps()).map(|m| matched[n + m * n_zc]).sum())
        .collect()
}

/// Threshold giving false-alarm probability `pfa` when the statistic is
/// `Gamma(shape = M, scale = N_zc * noise_power * energy_per_sample)`.
pub fn gamma_threshold(
    spec: &PreambleSpec,
    noise_power: f64,
    energy_per_sample: f64,
    pfa: f64,
) -> Result<f64> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "pfa must be in (0, 1), got {pfa}"
        )));
    }
    let scale = spec.n_zc() as f64 * noise_power * energy_per_sample;
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise power {noise_power} gives an invalid gamma scale"
        )));
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    let null = Gamma::new(spec.m_reps() as f64, 1.0 / scale)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(null.inverse_cdf(1.0 - pfa))
}

/// Per-sample trigger decisions on a correlation trace.
pub fn trigger_mask(
    trace: &[f64],
    spec: &PreambleSpec,
    cfg: &DetectorConfig,
    noise_power: f64,
) -> Result<Vec<bool>> {
    cfg.validate()?;
    match *cfg {
        DetectorConfig::NoiseFloorGamma { target_pfa } => {
            let zc = zc_sequence(spec);
            let energy = zc.iter().map(|s| s.norm_sqr()).sum::<f64>() / zc.len() as f64;
            let eta = gamma_threshold(spec, noise_power, energy, target_pfa)?;
            Ok(trace.iter().map(|&y| y > eta).collect())
        }
        DetectorConfig::CfarMovingAverage { factor, window } => {
            let mut mask = Vec::with_capacity(trace.len());
            let mut sum = 0.0;
            for (n, &y) in trace.iter().enumerate() {
                let held = n.min(window);
                let reference = if held == 0 { 0.0 } else { sum / held as f64 };
                mask.push(y > factor * reference);
                sum += y;
                if n >= window {
                    sum -= trace[n - window];
                }
            }
            Ok(mask)
        }
    }
}

/// Result of the preamble search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// Integer delay estimate; `None` when nothing triggered.
    pub d_hat: Option<usize>,
    /// Statistic at `d_hat`, or the trace maximum when nothing triggered.
    pub peak: f64,
}

impl Detection {
    pub fn detected(&self) -> bool {
        self.d_hat.is_some()
    }
}

/// Scans the trace, and takes the argmax over the triggered region: every
/// sample within one preamble length after a trigger. The span covers the
/// full correlation staircase of a repeated preamble, whose first step
/// triggers up to `(M-1) N_zc` samples before the true peak. Ties resolve to
/// the earliest index.
pub fn detect_and_integer_delay(
    r: &[Complex64],
    spec: &PreambleSpec,
    cfg: &DetectorConfig,
    noise_power: f64,
) -> Result<Detection> {
    let trace = correlation_trace(r, spec);
    let mask = trigger_mask(&trace, spec, cfg, noise_power)?;
    let hangover = spec.len();
    let mut best: Option<(usize, f64)> = None;
    let mut open_until = 0usize;
    for (n, (&y, &hit)) in trace.iter().zip(&mask).enumerate() {
        if hit {
            open_until = n + hangover;
        }
        if n < open_until && best.is_none_or(|(_, b)| y > b) {
            best = Some((n, y));
        }
    }
    Ok(match best {
        Some((n, y)) => Detection {
            d_hat: Some(n),
            peak: y,
        },
        None => Detection {
            d_hat: None,
            peak: trace.iter().copied().fold(0.0, f64::max),
        },
    })
}

/// Debug dump of a correlation trace with columns `n,y_corr`.
pub fn write_trace_csv<W: Write>(trace: &[f64], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "y_corr"])?;
    for (n, y) in trace.iter().enumerate() {
        w.write_record(&[n.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{add_awgn, apply_impairments, ImpairmentParams};
    use crate::preamble::build_preamble;
    use crate::rng::{rng_for, Stream};
    use crate::signal::ComplexSignal;

    const TS: f64 = 1e-6;

    fn zeros(n: usize) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); n]
    }

    #[test]
    fn statistic_peak_value_noiseless() {
        let spec = PreambleSpec::default();
        let r = build_preamble(&spec);
        let y = detection_statistic(&r, &spec, 0).unwrap();
        assert!((y - 39690.0).abs() < 1e-6, "{y}");
    }

    #[test]
    fn statistic_of_zeros_and_range_check() {
        let spec = PreambleSpec::default();
        let r = zeros(700);
        assert_eq!(detection_statistic(&r, &spec, 0).unwrap(), 0.0);
        assert!(detection_statistic(&r, &spec, 71).is_err());
        assert!(detection_statistic(&r, &spec, 70).is_ok());
    }

    fn rotated(len_spec: &PreambleSpec, eps: f64) -> Vec<Complex64> {
        build_preamble(len_spec)
            .iter()
            .enumerate()
            .map(|(n, s)| s * Complex64::from_polar(1.0, eps * n as f64))
            .collect()
    }

    /// Per-window coherence `|sum_k e^{j eps k}|^2` over `n` samples.
    fn coherence(eps: f64, n: usize) -> f64 {
        (0..n)
            .map(|k| Complex64::from_polar(1.0, eps * k as f64))
            .sum::<Complex64>()
            .norm_sqr()
    }

    #[test]
    fn statistic_under_cfo_matches_window_coherence() {
        let spec = PreambleSpec::default();
        for eps in [0.0, 0.01, 0.03, 0.075] {
            let y = detection_statistic(&rotated(&spec, eps), &spec, 0).unwrap();
            let expected = 10.0 * coherence(eps, 63);
            assert!(
                (y - expected).abs() < 1e-6 * expected.max(1.0),
                "eps {eps}: {y} vs {expected}"
            );
        }
        let mild = detection_statistic(&rotated(&spec, 0.01), &spec, 0).unwrap();
        assert!(mild >= 0.9 * 39690.0);
    }

    #[test]
    fn repetitions_beat_one_long_sequence_under_cfo() {
        // Same 630-sample budget: ten 63-sample windows against one 630-sample
        // window, normalized to their zero-CFO peaks.
        let eps = 0.075;
        let short = 10.0 * coherence(eps, 63) / (10.0 * 63.0f64.powi(2));
        let long = coherence(eps, 630) / 630.0f64.powi(2);
        let spec = PreambleSpec::default();
        let y = detection_statistic(&rotated(&spec, eps), &spec, 0).unwrap() / 39690.0;
        assert!((y - short).abs() < 1e-9);
        assert!(y > 10.0 * long, "{y} vs {long}");
    }

    #[test]
    fn trace_matches_direct_statistic() {
        let spec = PreambleSpec::new(31, 7, 3).unwrap();
        let mut r = zeros(300);
        let mut rng = rng_for(1, 0, Stream::MonteCarlo);
        add_awgn(&mut r, 1.0, &mut rng);
        let trace = correlation_trace(&r, &spec);
        assert_eq!(trace.len(), 300 - 93 + 1);
        for (n, &y) in trace.iter().enumerate() {
            let direct = detection_statistic(&r, &spec, n).unwrap();
            assert!((y - direct).abs() <= 1e-9 * direct.max(1.0));
        }
        assert!(correlation_trace(&r[..92], &spec).is_empty());
    }

    #[test]
    fn noiseless_preamble_at_offset_100() {
        let spec = PreambleSpec::default();
        let mut r = zeros(100);
        r.extend(build_preamble(&spec));
        r.extend(zeros(700));
        for cfg in [
            DetectorConfig::default(),
            DetectorConfig::NoiseFloorGamma { target_pfa: 1e-4 },
        ] {
            let det = detect_and_integer_delay(&r, &spec, &cfg, 0.0).unwrap();
            assert_eq!(det.d_hat, Some(100), "{cfg:?}");
            assert!((det.peak - 39690.0).abs() < 1e-6);
        }
    }

    #[test]
    fn cfar_detects_after_noise_history() {
        let spec = PreambleSpec::default();
        let tx = ComplexSignal::new(build_preamble(&spec), TS).unwrap();
        let params = ImpairmentParams {
            cfo_hz: 900.0,
            sto_seconds: 1500.0 * TS,
            gain: Complex64::from_polar(1.0, 0.7),
            ..ImpairmentParams::identity(TS)
        }
        .with_snr_db(10.0);
        let r = apply_impairments(&tx, &params, &Default::default(), 11, 1600).unwrap();
        let det = detect_and_integer_delay(
            r.samples(),
            &spec,
            &DetectorConfig::default(),
            params.noise_power,
        )
        .unwrap();
        assert_eq!(det.d_hat, Some(1500));
    }

    #[test]
    fn no_trigger_without_preamble() {
        let spec = PreambleSpec::default();
        let mut r = zeros(5000);
        add_awgn(&mut r, 1.0, &mut rng_for(3, 0, Stream::MonteCarlo));
        let det = detect_and_integer_delay(
            &r,
            &spec,
            &DetectorConfig::NoiseFloorGamma { target_pfa: 1e-9 },
            1.0,
        )
        .unwrap();
        assert!(!det.detected());
        assert!(det.peak > 0.0);
    }

    #[test]
    fn gamma_threshold_properties() {
        let spec = PreambleSpec::default();
        let a = gamma_threshold(&spec, 1.0, 1.0, 1e-4).unwrap();
        let b = gamma_threshold(&spec, 2.0, 1.0, 1e-4).unwrap();
        assert!((b / a - 2.0).abs() < 1e-9);
        assert!(gamma_threshold(&spec, 1.0, 1.0, 1e-2).unwrap() < a);
        assert_eq!(gamma_threshold(&spec, 0.0, 1.0, 1e-4).unwrap(), 0.0);
        assert!(gamma_threshold(&spec, 1.0, 1.0, 0.0).is_err());
        // Mean of Gamma(10, 63) is 630; the 1e-4 upper tail sits well above it.
        assert!(a > 2.0 * 630.0);
    }

    #[test]
    fn ambiguity_at_half_sample_delay() {
        let spec = PreambleSpec::default();
        let tx = ComplexSignal::new(build_preamble(&spec), TS).unwrap();
        let d_star = 200usize;
        let mut hits = 0;
        let trials = 1000;
        for t in 0..trials {
            let params = ImpairmentParams {
                cfo_hz: 500.0,
                sto_seconds: (d_star as f64 + 0.5) * TS,
                gain: Complex64::from_polar(1.0, t as f64 * 0.1),
                ..ImpairmentParams::identity(TS)
            }
            .with_snr_db(20.0);
            let r = apply_impairments(&tx, &params, &Default::default(), t, 300).unwrap();
            let det = detect_and_integer_delay(
                r.samples(),
                &spec,
                &DetectorConfig::NoiseFloorGamma { target_pfa: 1e-4 },
                params.noise_power,
            )
            .unwrap();
            if matches!(det.d_hat, Some(d) if d == d_star || d == d_star + 1) {
                hits += 1;
            }
        }
        assert!(hits as f64 >= 0.99 * trials as f64, "{hits}");
    }

    #[test]
    fn null_statistic_follows_gamma() {
        // Non-overlapping windows give independent draws of the normalized
        // statistic, which should be Gamma(M, 1).
        let spec = PreambleSpec::default();
        let samples = 100_000;
        let mut r = zeros(samples * spec.len());
        add_awgn(&mut r, 1.0, &mut rng_for(17, 0, Stream::MonteCarlo));
        let trace = correlation_trace(&r, &spec);
        let mut normalized: Vec<f64> = (0..samples)
            .map(|i| trace[i * spec.len()] / spec.n_zc() as f64)
            .collect();
        normalized.sort_by(f64::total_cmp);
        let null = Gamma::new(10.0, 1.0).unwrap();
        let n = normalized.len() as f64;
        let ks = normalized
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = null.cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks <= 0.02, "Kolmogorov distance {ks}");
    }

    #[test]
    fn cfar_reference_uses_trailing_window() {
        let spec = PreambleSpec::new(3, 1, 2).unwrap();
        let trace = [1.0, 1.0, 1.0, 1.0, 25.0, 1.0, 1.0];
        let cfg = DetectorConfig::CfarMovingAverage {
            factor: 10.0,
            window: 2,
        };
        let mask = trigger_mask(&trace, &spec, &cfg, 0.0).unwrap();
        assert_eq!(mask, vec![true, false, false, false, true, false, false]);
        assert!(trigger_mask(
            &trace,
            &spec,
            &DetectorConfig::CfarMovingAverage {
                factor: 0.5,
                window: 2
            },
            0.0
        )
        .is_err());
    }

    #[test]
    fn trace_csv_dump() {
        let mut buf = Vec::new();
        write_trace_csv(&[1.5, 2.0], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,y_corr\n0,1.5\n1,2\n");
    }
}
