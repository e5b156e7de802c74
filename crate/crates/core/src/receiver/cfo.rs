use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::preamble::PreambleSpec;
use crate::signal::ComplexSignal;

/// One-shot normalized CFO from the repetition structure:
/// `angle(sum_n r[d + N + n] conj(r[d + n])) / N` over `n < (M-1) N`.
///
/// Uses the four-quadrant angle, so the result lies in `(-pi/N, pi/N]`.
pub fn estimate_cfo_oneshot(r: &[Complex64], d_hat: usize, spec: &PreambleSpec) -> Result<f64> {
    let n_zc = spec.n_zc();
    let needed = d_hat + spec.len();
    if needed > r.len() {
        return Err(Error::OutOfRange {
            index: d_hat,
            needed,
            available: r.len(),
        });
    }
    let span = (spec.m_reps() - 1) * n_zc;
    let early = &r[d_hat..d_hat + span];
    let late = &r[d_hat + n_zc..d_hat + n_zc + span];
    let acc: Complex64 = late.iter().zip(early).map(|(b, a)| b * a.conj()).sum();
    if acc == Complex64::new(0.0, 0.0) {
        return Err(Error::Degenerate(
            "repetition correlation is exactly zero".into(),
        ));
    }
    Ok(acc.arg() / n_zc as f64)
}

/// `r~[n] = r[n] e^{-j eps n}`, additionally rotated by `e^{-j phi}` when
/// `apply_phase` is set.
pub fn compensate_cfo(
    r: &ComplexSignal,
    eps_f_hat: f64,
    phi_hat: f64,
    apply_phase: bool,
) -> ComplexSignal {
    let phase0 = if apply_phase { phi_hat } else { 0.0 };
    let samples = r
        .samples()
        .iter()
        .enumerate()
        .map(|(n, s)| s * Complex64::from_polar(1.0, -(eps_f_hat * n as f64 + phase0)))
        .collect();
    ComplexSignal::new(samples, r.sample_duration()).expect("rotation keeps samples finite")
}
