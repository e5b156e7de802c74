//! Interpolation kernels used both by the channel (pulse shape) and by the
//! receiver's fractional-delay dictionary.

use std::f64::consts::PI;

/// Band-limited interpolation kernel, evaluated at offsets measured in samples.
///
/// Every variant is interpolating: `eval(0) == 1` and `eval(k) == 0` for any
/// nonzero integer `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterpolationKernel {
    /// `sinc(t)` tapered by a Hann window that reaches zero at `|t| = half_span`.
    HannSinc { half_span: usize },
    /// Triangle, `max(0, 1 - |t|)`.
    Linear,
}

impl Default for InterpolationKernel {
    fn default() -> Self {
        InterpolationKernel::HannSinc { half_span: 8 }
    }
}

impl InterpolationKernel {
    /// Support radius in samples; `eval(t) == 0` for `|t| >= half_span()`.
    pub fn half_span(&self) -> usize {
        match *self {
            InterpolationKernel::HannSinc { half_span } => half_span,
            InterpolationKernel::Linear => 1,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            InterpolationKernel::HannSinc { half_span } => {
                let h = half_span as f64;
                if t.abs() >= h {
                    return 0.0;
                }
                if t != 0.0 && t.fract() == 0.0 {
                    return 0.0;
                }
                let window = 0.5 * (1.0 + (PI * t / h).cos());
                sinc(t) * window
            }
            InterpolationKernel::Linear => (1.0 - t.abs()).max(0.0),
        }
    }

    /// Short name used in config files.
    pub fn name(&self) -> &'static str {
        match self {
            InterpolationKernel::HannSinc { .. } => "hann_sinc",
            InterpolationKernel::Linear => "linear",
        }
    }
}

/// Normalized sinc, `sin(pi t) / (pi t)`.
pub fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        let x = PI * t;
        x.sin() / x
    }
}
