use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::preamble::{PreambleSpec, ReplicaDictionary};

/// Filter-bank metric for every dictionary entry:
/// `sum_m |sum_n conj(r~[d + m N + n]) s_zeta[n]|^2 / ||s_zeta||^2`.
///
/// Interpolating a full-band sequence loses energy as `|zeta|` grows, so the
/// unnormalized sum would favour replicas near zero delay.
pub fn replica_metrics(
    r_tilde: &[Complex64],
    d_hat: usize,
    spec: &PreambleSpec,
    dictionary: &ReplicaDictionary,
) -> Result<Vec<f64>> {
    let needed = d_hat + spec.len();
    if needed > r_tilde.len() {
        return Err(Error::OutOfRange {
            index: d_hat,
            needed,
            available: r_tilde.len(),
        });
    }
    let n_zc = spec.n_zc();
    if dictionary.entries().iter().any(|e| e.samples.len() != n_zc) {
        return Err(Error::InvalidParameter(
            "dictionary replicas do not match the preamble length".into(),
        ));
    }
    let window = &r_tilde[d_hat..needed];
    Ok(dictionary
        .entries()
        .iter()
        .map(|entry| {
            let energy: f64 = entry.samples.iter().map(|s| s.norm_sqr()).sum();
            let total: f64 = window
                .chunks_exact(n_zc)
                .map(|block| {
                    block
                        .iter()
                        .zip(&entry.samples)
                        .map(|(r, s)| r.conj() * s)
                        .sum::<Complex64>()
                        .norm_sqr()
                })
                .sum();
            if energy > 0.0 {
                total / energy
            } else {
                0.0
            }
        })
        .collect())
}

/// Fractional delay (units of Ts) of the best-matching replica. Metrics
/// within a relative `1e-12` of the maximum count as tied; ties go to the
/// smallest `|zeta|`, then to the earlier entry.
pub fn estimate_fractional_delay(
    r_tilde: &[Complex64],
    d_hat: usize,
    spec: &PreambleSpec,
    dictionary: &ReplicaDictionary,
) -> Result<f64> {
    let metrics = replica_metrics(r_tilde, d_hat, spec, dictionary)?;
    let max = metrics.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Degenerate("empty replica dictionary".into()));
    }
    let tol = 1e-12 * max.abs();
    let mut best: Option<f64> = None;
    for (entry, &m) in dictionary.entries().iter().zip(&metrics) {
        if max - m <= tol && best.is_none_or(|b| entry.delay.abs() < b.abs()) {
            best = Some(entry.delay);
        }
    }
    Ok(best.expect("at least one entry attains the maximum"))
}
