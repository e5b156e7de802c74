use num_complex::Complex64;

use crate::error::{Error, Result};

/// A run of complex baseband samples together with their sample duration.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    samples: Vec<Complex64>,
    sample_duration: f64,
}

impl ComplexSignal {
    /// Wraps `samples`; rejects non-finite samples and a non-positive sample duration.
    pub fn new(samples: Vec<Complex64>, sample_duration: f64) -> Result<Self> {
        if !(sample_duration.is_finite() && sample_duration > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample duration must be positive and finite, got {sample_duration}"
            )));
        }
        if let Some(i) = samples
            .iter()
            .position(|s| !(s.re.is_finite() && s.im.is_finite()))
        {
            return Err(Error::InvalidParameter(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_duration,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_duration(&self) -> f64 {
        self.sample_duration
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.sample_duration
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }
}
