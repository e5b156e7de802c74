use crate::error::{Error, Result};
use crate::preamble::PreambleSpec;

/// Preamble timing on the master's frame grid. Durations in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSchedule {
    pub t_sync: f64,
    pub t_guard: f64,
    pub t_frame: f64,
    pub n_frames: usize,
    pub sample_duration: f64,
}

impl FrameSchedule {
    pub fn new(
        spec: &PreambleSpec,
        sample_duration: f64,
        t_guard: f64,
        t_frame: f64,
        n_frames: usize,
    ) -> Result<Self> {
        let t_sync = spec.len() as f64 * sample_duration;
        for (name, v) in [
            ("sample duration", sample_duration),
            ("t_guard", t_guard),
            ("t_frame", t_frame),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if n_frames == 0 {
            return Err(Error::InvalidParameter("n_frames must be >= 1".into()));
        }
        if t_frame < t_sync + t_guard {
            return Err(Error::InvalidParameter(format!(
                "frame of {t_frame} s cannot hold a {t_sync} s preamble plus {t_guard} s guard"
            )));
        }
        Ok(Self {
            t_sync,
            t_guard,
            t_frame,
            n_frames,
            sample_duration,
        })
    }

    /// Samples between consecutive preamble starts.
    pub fn n_cyc(&self) -> u64 {
        (self.t_frame / self.sample_duration).round() as u64
    }

    /// Time left for cooperative transmission in each frame.
    pub fn t_cooperative(&self) -> f64 {
        self.t_frame - self.t_sync - self.t_guard
    }
}
