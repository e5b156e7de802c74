//! Frame-level simulation: the master sends one preamble per frame, the
//! channel impairs it, and the slave synchronizes against it.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::{
    add_awgn, apply_impairments, estimate_noise_power, oscillator_drift_step, ImpairmentParams,
};
use crate::error::{Error, Result};
use crate::preamble::build_preamble;
use crate::receiver::{synchronize, SyncConfig, SyncEstimate, Tracking};
use crate::rng::{derive_seed, rng_for, Stream};
use crate::signal::ComplexSignal;

use super::config::Config;
use super::stats::{
    CampaignReport, ErrorStats, CFO_BIN_WIDTH_HZ, CFO_THRESHOLDS_HZ, STO_BIN_WIDTH_TS,
    STO_THRESHOLDS_TS,
};

const NOISE_CAPTURE_LEN: usize = 4096;
const TAIL_SAMPLES: usize = 16;

/// Ground truth for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTruth {
    pub cfo_hz: f64,
    /// Delay in samples, `d* + zeta*`.
    pub sto_ts: f64,
    /// Carrier phase accumulated since the first frame, folded into the gain.
    pub carrier_phase: f64,
    /// Sample count the slave's timer reports since the previous preamble.
    pub n_cyc_measured: u64,
}

/// One line of the trial log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub frame: usize,
    pub truth: FrameTruth,
    pub estimate: SyncEstimate,
}

impl FrameRecord {
    /// `(residual CFO in Hz, residual STO in Ts)` for a detected frame.
    pub fn residuals(&self, sample_duration: f64) -> Option<(f64, f64)> {
        self.estimate.solution().map(|s| {
            let cfo_hat = s.eps_f_hat / (2.0 * std::f64::consts::PI * sample_duration);
            (
                self.truth.cfo_hz - cfo_hat,
                self.truth.sto_ts - (s.d_hat as f64 + s.zeta_hat),
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub report: CampaignReport,
    pub records: Vec<FrameRecord>,
    /// Whether frames ran concurrently (only when tracking is off).
    pub parallel: bool,
}

/// Per-frame truths. Drift is a sequential random walk; the carrier phase
/// accumulates `2 pi cfo Ts n_cyc` per frame.
pub fn frame_truths(cfg: &Config) -> Result<Vec<FrameTruth>> {
    let schedule = cfg.frame_schedule()?;
    let ts = schedule.sample_duration;
    let n_cyc = schedule.n_cyc();
    let mut drift = rng_for(cfg.seed, 0, Stream::Drift);
    let mut cfo = cfg.channel.cfo_hz;
    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(schedule.n_frames);
    for frame in 0..schedule.n_frames {
        if frame > 0 {
            phase += 2.0 * std::f64::consts::PI * cfo * ts * n_cyc as f64;
            phase = phase.rem_euclid(2.0 * std::f64::consts::PI);
            cfo = oscillator_drift_step(
                cfo,
                cfg.channel.drift_hz_per_s,
                schedule.t_frame,
                &mut drift,
            );
        }
        let jitter = cfg.schedule.timer_jitter_samples;
        let n_cyc_measured = if jitter > 0.0 {
            let mut rng = rng_for(cfg.seed, frame as u64, Stream::TimerJitter);
            let z: f64 = rng.sample(StandardNormal);
            (n_cyc as f64 + (jitter * z).round()).max(1.0) as u64
        } else {
            n_cyc
        };
        out.push(FrameTruth {
            cfo_hz: cfo,
            sto_ts: cfg.channel.sto_ts,
            carrier_phase: phase,
            n_cyc_measured,
        });
    }
    Ok(out)
}

fn base_params(cfg: &Config) -> ImpairmentParams {
    let ch = &cfg.channel;
    let ts = ch.sample_duration();
    ImpairmentParams {
        cfo_hz: ch.cfo_hz,
        sto_seconds: ch.sto_ts * ts,
        gain: Complex64::from_polar(ch.gain_mag, ch.gain_phase_rad),
        noise_power: 0.0,
        sample_duration: ts,
    }
    .with_snr_db(ch.snr_db)
}

/// Received samples for one frame.
pub fn frame_signal(cfg: &Config, frame: usize, truth: &FrameTruth) -> Result<ComplexSignal> {
    let base = base_params(cfg);
    let params = ImpairmentParams {
        cfo_hz: truth.cfo_hz,
        sto_seconds: truth.sto_ts * base.sample_duration,
        gain: base.gain * Complex64::from_polar(1.0, truth.carrier_phase),
        ..base
    };
    params.validate_for(&cfg.preamble)?;
    let tx = ComplexSignal::new(build_preamble(&cfg.preamble), base.sample_duration)?;
    let pad = truth.sto_ts.ceil() as usize + cfg.channel.kernel.half_span() + TAIL_SAMPLES;
    let seed = derive_seed(cfg.seed, frame as u64, Stream::ChannelNoise);
    apply_impairments(&tx, &params, &cfg.channel.kernel, seed, pad)
}

/// Noise floor the receiver measures once from a signal-free capture.
pub fn measured_noise_power(cfg: &Config) -> Result<f64> {
    let noise_power = base_params(cfg).noise_power;
    let mut capture = vec![Complex64::new(0.0, 0.0); NOISE_CAPTURE_LEN];
    add_awgn(
        &mut capture,
        noise_power,
        &mut rng_for(cfg.seed, 0, Stream::NoiseCapture),
    );
    estimate_noise_power(&capture)
}

pub fn sync_config(cfg: &Config) -> Result<SyncConfig> {
    let mut sync = SyncConfig::new(
        cfg.preamble,
        cfg.detector.detector(),
        cfg.receiver.n_zeta,
        cfg.channel.kernel,
        cfg.ekf_noise()?,
    )?;
    sync.apply_phase = cfg.receiver.apply_phase;
    Ok(sync)
}

/// Runs every frame of the schedule and aggregates residual statistics.
/// Frames run in parallel when tracking is disabled; results are identical
/// either way because every random stream is keyed by frame index.
pub fn run_trial_campaign(cfg: &Config) -> Result<CampaignResult> {
    cfg.validate()?;
    let truths = frame_truths(cfg)?;
    let sync = sync_config(cfg)?;
    let noise_power = measured_noise_power(cfg)?;

    let run_frame = |frame: usize, tracking: Option<Tracking>| {
        let r = frame_signal(cfg, frame, &truths[frame])?;
        synchronize(&r, &sync, tracking, noise_power)
    };

    let parallel = !cfg.ekf.enabled;
    let estimates: Vec<SyncEstimate> = if parallel {
        (0..truths.len())
            .into_par_iter()
            .map(|f| run_frame(f, None).map(|o| o.estimate))
            .collect::<Result<_>>()?
    } else {
        let mut prior = None;
        let mut out = Vec::with_capacity(truths.len());
        for (f, truth) in truths.iter().enumerate() {
            let outcome = run_frame(
                f,
                Some(Tracking {
                    prior,
                    n_cyc: truth.n_cyc_measured,
                }),
            )?;
            prior = outcome.ekf;
            out.push(outcome.estimate);
        }
        out
    };

    let records: Vec<FrameRecord> = estimates
        .into_iter()
        .zip(&truths)
        .enumerate()
        .map(|(frame, (estimate, truth))| FrameRecord {
            frame,
            truth: *truth,
            estimate,
        })
        .collect();
    let report = summarize(cfg, &records, noise_power)?;
    Ok(CampaignResult {
        report,
        records,
        parallel,
    })
}

fn summarize(cfg: &Config, records: &[FrameRecord], noise_power: f64) -> Result<CampaignReport> {
    let ts = cfg.channel.sample_duration();
    let (cfo, sto): (Vec<f64>, Vec<f64>) = records.iter().filter_map(|r| r.residuals(ts)).unzip();
    let missed = records.len() - cfo.len();
    if cfo.is_empty() {
        let best_peak = records
            .iter()
            .map(|r| match r.estimate {
                SyncEstimate::Missed { peak_value } => peak_value,
                SyncEstimate::Locked(s) => s.peak_value,
            })
            .fold(0.0, f64::max);
        return Err(Error::NoDetections {
            frames: records.len(),
            best_peak,
            reference: noise_power,
        });
    }
    Ok(CampaignReport {
        cfo: ErrorStats::from_samples(&cfo, &CFO_THRESHOLDS_HZ, CFO_BIN_WIDTH_HZ)?,
        sto: ErrorStats::from_samples(&sto, &STO_THRESHOLDS_TS, STO_BIN_WIDTH_TS)?,
        frames: records.len(),
        missed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(extra: &str) -> Config {
        Config::parse(&format!("schedule.n_frames=40\n{extra}")).unwrap()
    }

    #[test]
    fn noiseless_on_grid_is_exact() {
        let cfg = small(
            "channel.snr_db=inf\nchannel.sto_ts=500.5\nchannel.cfo_hz=800\nekf.enabled=false\n",
        );
        let res = run_trial_campaign(&cfg).unwrap();
        assert_eq!(res.report.missed, 0);
        assert!(res.report.cfo.mean.abs() < 1e-6 && res.report.cfo.std_dev < 1e-6);
        assert_eq!(res.report.sto.mean, 0.0);
        assert_eq!(res.report.sto.std_dev, 0.0);
    }

    #[test]
    fn tracked_noiseless_campaign_is_exact() {
        let cfg = small("channel.snr_db=inf\nchannel.sto_ts=300\n");
        let res = run_trial_campaign(&cfg).unwrap();
        assert!(!res.parallel);
        assert!(res.report.cfo.std_dev < 1e-3, "{}", res.report.cfo.std_dev);
        assert_eq!(res.report.sto.std_dev, 0.0);
    }

    #[test]
    fn deterministic_in_both_modes() {
        for extra in ["ekf.enabled=false\n", "ekf.enabled=true\n"] {
            let cfg = small(extra);
            let a = run_trial_campaign(&cfg).unwrap();
            let b = run_trial_campaign(&cfg).unwrap();
            assert_eq!(
                a.report.summary_csv().unwrap(),
                b.report.summary_csv().unwrap()
            );
            assert_eq!(a.records, b.records);
        }
    }

    #[test]
    fn residuals_match_trial_log() {
        let cfg = small("ekf.enabled=false\n");
        let res = run_trial_campaign(&cfg).unwrap();
        let mut detected = 0;
        for r in &res.records {
            if let SyncEstimate::Locked(s) = r.estimate {
                detected += 1;
                let (_, sto) = r.residuals(1e-6).unwrap();
                let independent = cfg.channel.sto_ts - s.d_hat as f64 - s.zeta_hat;
                assert!((sto - independent).abs() < 1e-9, "{sto} vs {independent}");
            }
        }
        assert_eq!(detected, res.report.sto.n_samples);
        assert_eq!(
            res.report.cfo.histogram.iter().map(|h| h.1).sum::<usize>() + res.report.missed,
            res.records.len()
        );
    }

    #[test]
    fn no_detection_is_an_error() {
        let cfg = small("channel.snr_db=-40\ndetector.mode=gamma\ndetector.target_pfa=1e-12\nekf.enabled=false\n");
        assert!(matches!(
            run_trial_campaign(&cfg),
            Err(Error::NoDetections { frames: 40, .. })
        ));
    }

    #[test]
    fn drift_walks_the_offset() {
        let cfg = small("channel.drift_hz_per_s=100\n");
        let truths = frame_truths(&cfg).unwrap();
        assert_eq!(truths[0].cfo_hz, 1500.0);
        assert!(truths.windows(2).all(|w| w[0].cfo_hz != w[1].cfo_hz));
        let jit = frame_truths(&small("schedule.timer_jitter_samples=3\n")).unwrap();
        assert!(jit.iter().any(|t| t.n_cyc_measured != 10_000));
    }
}
