//! Plain-text `key=value` configuration with namespaced keys.
//!
//! Blank lines and anything after `#` are ignored. Every key is optional;
//! unknown or repeated keys are errors.

use std::path::Path;

use crate::bounds::{crlb_cfo_variance, CrlbInputs};
use crate::dbfsim::{DbfScenario, ErrorKind};
use crate::error::{Error, Result};
use crate::kernel::InterpolationKernel;
use crate::preamble::PreambleSpec;
use crate::receiver::{DetectorConfig, EkfNoise};

use super::schedule::FrameSchedule;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub sample_rate_hz: f64,
    pub cfo_hz: f64,
    /// True delay in samples, integer plus fractional part.
    pub sto_ts: f64,
    /// `inf` disables noise.
    pub snr_db: f64,
    pub gain_mag: f64,
    pub gain_phase_rad: f64,
    pub drift_hz_per_s: f64,
    pub kernel: InterpolationKernel,
    pub clock_skew_ppm: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 1e6,
            cfo_hz: 1500.0,
            sto_ts: 1200.37,
            snr_db: 20.0,
            gain_mag: 1.0,
            gain_phase_rad: 0.0,
            drift_hz_per_s: 0.0,
            kernel: InterpolationKernel::default(),
            clock_skew_ppm: 0.0,
        }
    }
}

impl ChannelConfig {
    pub fn sample_duration(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub t_guard_ms: f64,
    pub t_frame_ms: f64,
    pub n_frames: usize,
    /// Recorded for completeness; no computation uses them.
    pub t_intra_ms: f64,
    pub t_inter_ms: f64,
    /// Std. dev. of the slave timer's sample count between preambles.
    pub timer_jitter_samples: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            t_guard_ms: 4.0,
            t_frame_ms: 10.0,
            n_frames: 650,
            t_intra_ms: 0.0,
            t_inter_ms: 0.0,
            timer_jitter_samples: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorMode {
    Cfar,
    Gamma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSettings {
    pub mode: DetectorMode,
    pub cfar_factor: f64,
    pub cfar_window: usize,
    pub target_pfa: f64,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        Self {
            mode: DetectorMode::Cfar,
            cfar_factor: 10.0,
            cfar_window: 1000,
            target_pfa: 1e-4,
        }
    }
}

impl DetectorSettings {
    pub fn detector(&self) -> DetectorConfig {
        match self.mode {
            DetectorMode::Cfar => DetectorConfig::CfarMovingAverage {
                factor: self.cfar_factor,
                window: self.cfar_window,
            },
            DetectorMode::Gamma => DetectorConfig::NoiseFloorGamma {
                target_pfa: self.target_pfa,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverSettings {
    pub n_zeta: usize,
    pub apply_phase: bool,
}

impl Default for ReceiverSettings {
    fn default() -> Self {
        Self {
            n_zeta: 16,
            apply_phase: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkfSettings {
    pub enabled: bool,
    pub q_phi: f64,
    pub q_eps: f64,
    pub r_cos: f64,
    pub r_sin: f64,
    /// `None` derives the CFO measurement variance from the CRLB.
    pub r_eps: Option<f64>,
}

impl Default for EkfSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            q_phi: 1e-6,
            q_eps: 1e-10,
            r_cos: 0.05,
            r_sin: 0.05,
            r_eps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbfSettings {
    pub scenario: DbfScenario,
    pub kind: ErrorKind,
    pub group_sizes: Vec<(usize, usize)>,
    pub error_levels: Vec<f64>,
}

impl Default for DbfSettings {
    fn default() -> Self {
        Self {
            scenario: DbfScenario::default(),
            kind: ErrorKind::Freq,
            group_sizes: vec![(2, 2), (4, 4), (8, 8), (16, 16)],
            error_levels: vec![0.0, 5.0, 10.0, 20.0, 40.0, 80.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub preamble: PreambleSpec,
    pub channel: ChannelConfig,
    pub schedule: ScheduleConfig,
    pub detector: DetectorSettings,
    pub receiver: ReceiverSettings,
    pub ekf: EkfSettings,
    pub dbf: DbfSettings,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            preamble: PreambleSpec::default(),
            channel: ChannelConfig::default(),
            schedule: ScheduleConfig::default(),
            detector: DetectorSettings::default(),
            receiver: ReceiverSettings::default(),
            ekf: EkfSettings::default(),
            dbf: DbfSettings::default(),
            seed: 1,
        }
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>().map_err(|_| format!("cannot parse {v:?}"))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected true or false, got {v:?}")),
    }
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',').map(|s| parse_num(s.trim())).collect()
}

/// `8` means 8x8; `4x8` means n_t=4, n_r=8.
fn parse_groups(v: &str) -> std::result::Result<Vec<(usize, usize)>, String> {
    v.split(',')
        .map(|s| {
            let s = s.trim();
            match s.split_once('x') {
                Some((t, r)) => Ok((parse_num(t.trim())?, parse_num(r.trim())?)),
                None => parse_num(s).map(|n| (n, n)),
            }
        })
        .collect()
}

impl Config {
    /// `"defaults"` selects the built-in configuration; anything else is read
    /// as a file.
    pub fn load(path: &str) -> Result<Self> {
        if path == "defaults" {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(Path::new(path), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let (mut n_zc, mut root, mut m_reps) = (
            cfg.preamble.n_zc(),
            cfg.preamble.root(),
            cfg.preamble.m_reps(),
        );
        let mut kernel_name = cfg.channel.kernel.name().to_string();
        let mut half_span = cfg.channel.kernel.half_span();
        let mut seen = std::collections::HashSet::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config {
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            let (key, v) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key}")));
            }
            let c = &mut cfg;
            let outcome: std::result::Result<(), String> = (|| {
                match key {
                    "preamble.n_zc" => n_zc = parse_num(v)?,
                    "preamble.root" => root = parse_num(v)?,
                    "preamble.m_reps" => m_reps = parse_num(v)?,
                    "channel.sample_rate_hz" => c.channel.sample_rate_hz = parse_num(v)?,
                    "channel.cfo_hz" => c.channel.cfo_hz = parse_num(v)?,
                    "channel.sto_ts" => c.channel.sto_ts = parse_num(v)?,
                    "channel.snr_db" => c.channel.snr_db = parse_num(v)?,
                    "channel.gain_mag" => c.channel.gain_mag = parse_num(v)?,
                    "channel.gain_phase_rad" => c.channel.gain_phase_rad = parse_num(v)?,
                    "channel.drift_hz_per_s" => c.channel.drift_hz_per_s = parse_num(v)?,
                    "channel.kernel" => kernel_name = v.to_string(),
                    "channel.kernel_half_span" => half_span = parse_num(v)?,
                    "channel.clock_skew_ppm" => c.channel.clock_skew_ppm = parse_num(v)?,
                    "schedule.t_guard_ms" => c.schedule.t_guard_ms = parse_num(v)?,
                    "schedule.t_frame_ms" => c.schedule.t_frame_ms = parse_num(v)?,
                    "schedule.n_frames" => c.schedule.n_frames = parse_num(v)?,
                    "schedule.t_intra_ms" => c.schedule.t_intra_ms = parse_num(v)?,
                    "schedule.t_inter_ms" => c.schedule.t_inter_ms = parse_num(v)?,
                    "schedule.timer_jitter_samples" => {
                        c.schedule.timer_jitter_samples = parse_num(v)?
                    }
                    "detector.mode" => {
                        c.detector.mode = match v {
                            "cfar" => DetectorMode::Cfar,
                            "gamma" => DetectorMode::Gamma,
                            _ => {
                                return Err(format!("unknown detector mode {v:?} (cfar or gamma)"))
                            }
                        }
                    }
                    "detector.cfar_factor" => c.detector.cfar_factor = parse_num(v)?,
                    "detector.cfar_window" => c.detector.cfar_window = parse_num(v)?,
                    "detector.target_pfa" => c.detector.target_pfa = parse_num(v)?,
                    "receiver.n_zeta" => c.receiver.n_zeta = parse_num(v)?,
                    "receiver.apply_phase" => c.receiver.apply_phase = parse_bool(v)?,
                    "ekf.enabled" => c.ekf.enabled = parse_bool(v)?,
                    "ekf.q_phi" => c.ekf.q_phi = parse_num(v)?,
                    "ekf.q_eps" => c.ekf.q_eps = parse_num(v)?,
                    "ekf.r_cos" => c.ekf.r_cos = parse_num(v)?,
                    "ekf.r_sin" => c.ekf.r_sin = parse_num(v)?,
                    "ekf.r_eps" => {
                        c.ekf.r_eps = if v == "auto" {
                            None
                        } else {
                            Some(parse_num(v)?)
                        }
                    }
                    "run.seed" => c.seed = parse_num(v)?,
                    "dbf.n_t" => c.dbf.scenario.n_t = parse_num(v)?,
                    "dbf.n_r" => c.dbf.scenario.n_r = parse_num(v)?,
                    "dbf.snr_link_db" => c.dbf.scenario.snr_link_db = parse_num(v)?,
                    "dbf.frame_duration_ms" => {
                        c.dbf.scenario.frame_duration_s = parse_num::<f64>(v)? * 1e-3
                    }
                    "dbf.symbol_duration_us" => {
                        c.dbf.scenario.symbol_duration_s = parse_num::<f64>(v)? * 1e-6
                    }
                    "dbf.n_trials" => c.dbf.scenario.n_trials = parse_num(v)?,
                    "dbf.pulse_rolloff" => c.dbf.scenario.pulse_rolloff = parse_num(v)?,
                    "dbf.pulse_span_symbols" => c.dbf.scenario.pulse_span_symbols = parse_num(v)?,
                    "dbf.kind" => {
                        c.dbf.kind = match v {
                            "freq" => ErrorKind::Freq,
                            "timing" => ErrorKind::Timing,
                            _ => return Err(format!("unknown error kind {v:?} (freq or timing)")),
                        }
                    }
                    "dbf.group_sizes" => c.dbf.group_sizes = parse_groups(v)?,
                    "dbf.error_levels" => c.dbf.error_levels = parse_list(v)?,
                    _ => return Err(format!("unknown key {key}")),
                }
                Ok(())
            })();
            outcome.map_err(|m| err(format!("{key}: {m}")))?;
        }

        cfg.preamble = PreambleSpec::new(n_zc, root, m_reps)?;
        cfg.channel.kernel = match kernel_name.as_str() {
            "hann_sinc" => InterpolationKernel::HannSinc { half_span },
            "linear" => InterpolationKernel::Linear,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown kernel {other:?} (hann_sinc or linear)"
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        let ch = &self.channel;
        if !(ch.sample_rate_hz.is_finite() && ch.sample_rate_hz > 0.0) {
            return bad(format!(
                "sample rate must be positive, got {}",
                ch.sample_rate_hz
            ));
        }
        if ch.clock_skew_ppm != 0.0 {
            return bad(
                "sample clock skew is not modeled; channel.clock_skew_ppm must be 0".into(),
            );
        }
        if !(ch.sto_ts.is_finite() && ch.sto_ts >= 0.0) {
            return bad(format!("channel.sto_ts must be >= 0, got {}", ch.sto_ts));
        }
        if ch.snr_db.is_nan() || ch.snr_db == f64::NEG_INFINITY {
            return bad(format!(
                "channel.snr_db must be a number or inf, got {}",
                ch.snr_db
            ));
        }
        if !(ch.gain_mag.is_finite() && ch.gain_mag > 0.0) {
            return bad(format!(
                "channel.gain_mag must be positive, got {}",
                ch.gain_mag
            ));
        }
        if !ch.drift_hz_per_s.is_finite()
            || !ch.cfo_hz.is_finite()
            || !ch.gain_phase_rad.is_finite()
        {
            return bad("channel parameters must be finite".into());
        }
        if let InterpolationKernel::HannSinc { half_span } = ch.kernel {
            if half_span == 0 {
                return bad("channel.kernel_half_span must be >= 1".into());
            }
        }
        if self.receiver.n_zeta == 0 {
            return bad("receiver.n_zeta must be >= 1".into());
        }
        if !(self.schedule.timer_jitter_samples.is_finite()
            && self.schedule.timer_jitter_samples >= 0.0)
        {
            return bad("schedule.timer_jitter_samples must be >= 0".into());
        }
        self.frame_schedule()?;
        self.detector.detector().validate()?;
        self.ekf_noise()?.validate()?;
        self.dbf.scenario.validate()?;
        if self.dbf.group_sizes.is_empty() || self.dbf.error_levels.is_empty() {
            return bad("dbf sweep lists must be non-empty".into());
        }
        Ok(())
    }

    pub fn frame_schedule(&self) -> Result<FrameSchedule> {
        FrameSchedule::new(
            &self.preamble,
            self.channel.sample_duration(),
            self.schedule.t_guard_ms * 1e-3,
            self.schedule.t_frame_ms * 1e-3,
            self.schedule.n_frames,
        )
    }

    /// Linear SNR at the receiver; infinite when noise is disabled.
    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.channel.snr_db / 10.0)
    }

    pub fn crlb_inputs(&self) -> Result<CrlbInputs> {
        CrlbInputs::for_preamble(
            &self.preamble,
            self.channel.sample_duration(),
            self.snr_linear(),
        )
    }

    /// EKF covariances; an automatic CFO measurement variance is the CRLB
    /// converted to (rad/sample)^2, or zero without noise.
    pub fn ekf_noise(&self) -> Result<EkfNoise> {
        let e = &self.ekf;
        let r_eps = match e.r_eps {
            Some(v) => v,
            None if self.snr_linear().is_infinite() => 0.0,
            None => {
                let ts = self.channel.sample_duration();
                crlb_cfo_variance(&self.crlb_inputs()?) * (2.0 * std::f64::consts::PI * ts).powi(2)
            }
        };
        Ok(EkfNoise::diagonal(
            e.q_phi, e.q_eps, e.r_cos, e.r_sin, r_eps,
        ))
    }
}
