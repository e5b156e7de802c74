//! Zadoff-Chu sequences, the repeated synchronization preamble and the bank of
//! fractionally delayed replicas used for fine timing.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::InterpolationKernel;

/// Fully determines the transmitted preamble: `m_reps` back-to-back copies of
/// a length-`n_zc` Zadoff-Chu sequence with root `root`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreambleSpec {
    n_zc: usize,
    root: usize,
    m_reps: usize,
}

impl Default for PreambleSpec {
    fn default() -> Self {
        Self {
            n_zc: 63,
            root: 25,
            m_reps: 10,
        }
    }
}

impl PreambleSpec {
    /// Validates length (odd, positive), root (coprime with the length) and
    /// repetition count (at least two).
    pub fn new(n_zc: usize, root: usize, m_reps: usize) -> Result<Self> {
        if n_zc == 0 || n_zc.is_multiple_of(2) {
            return Err(Error::InvalidPreamble(format!(
                "sequence length must be odd and positive, got {n_zc}"
            )));
        }
        if root == 0 || gcd(root, n_zc) != 1 {
            return Err(Error::InvalidPreamble(format!(
                "root {root} must be positive and coprime with length {n_zc}"
            )));
        }
        if m_reps < 2 {
            return Err(Error::InvalidPreamble(format!(
                "at least two repetitions are required, got {m_reps}"
            )));
        }
        Ok(Self { n_zc, root, m_reps })
    }

    pub fn n_zc(&self) -> usize {
        self.n_zc
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn m_reps(&self) -> usize {
        self.m_reps
    }

    /// Preamble length in samples, `m_reps * n_zc`.
    pub fn len(&self) -> usize {
        self.m_reps * self.n_zc
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `s[n] = exp(-j pi u n (n+1) / N)` for `n in 0..N`.
pub fn zc_sequence(spec: &PreambleSpec) -> Vec<Complex64> {
    let n_zc = spec.n_zc as u64;
    let u = spec.root as u64;
    (0..n_zc)
        .map(|n| {
            // u n (n+1) mod 2N keeps the phase argument small and exact.
            let k = (u * n % (2 * n_zc)) * ((n + 1) % (2 * n_zc)) % (2 * n_zc);
            Complex64::from_polar(1.0, -PI * k as f64 / n_zc as f64)
        })
        .collect()
}

/// `m_reps` concatenated copies of the ZC sequence.
pub fn build_preamble(spec: &PreambleSpec) -> Vec<Complex64> {
    let zc = zc_sequence(spec);
    let mut out = Vec::with_capacity(spec.len());
    for _ in 0..spec.m_reps {
        out.extend_from_slice(&zc);
    }
    out
}

/// Cyclically delays `x` by `delay` samples:
/// `y[n] = sum_k x[k mod N] * kernel(n - k - delay)`.
pub fn cyclic_delay(x: &[Complex64], delay: f64, kernel: &InterpolationKernel) -> Vec<Complex64> {
    let n_len = x.len() as i64;
    let span = kernel.half_span() as i64;
    (0..n_len)
        .map(|n| {
            let center = n as f64 - delay;
            let lo = (center - span as f64).floor() as i64;
            let hi = (center + span as f64).ceil() as i64;
            (lo..=hi)
                .map(|k| x[k.rem_euclid(n_len) as usize] * kernel.eval(center - k as f64))
                .sum()
        })
        .collect()
}

/// Fractional delays of the replica bank, in units of the sample duration:
/// `-1/2 + i / (n_zeta + 1)` for `i in 0..=n_zeta`.
pub fn delay_grid(n_zeta: usize) -> Vec<f64> {
    let k = (n_zeta + 1) as f64;
    (0..=n_zeta)
        .map(|i| (2.0 * i as f64 - k) / (2.0 * k))
        .collect()
}

/// One fractionally delayed ZC replica.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedReplica {
    /// Delay in units of the sample duration.
    pub delay: f64,
    pub samples: Vec<Complex64>,
}

/// Replica bank for the fractional-delay search, ordered by increasing delay.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaDictionary {
    entries: Vec<DelayedReplica>,
    kernel: InterpolationKernel,
}

impl ReplicaDictionary {
    pub fn entries(&self) -> &[DelayedReplica] {
        &self.entries
    }

    pub fn kernel(&self) -> &InterpolationKernel {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Grid spacing, `1 / (n_zeta + 1)`.
    pub fn step(&self) -> f64 {
        1.0 / self.entries.len() as f64
    }

    /// Debug dump with columns `delay_in_Ts,sample_index,re,im`.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["delay_in_Ts", "sample_index", "re", "im"])?;
        for entry in &self.entries {
            for (i, s) in entry.samples.iter().enumerate() {
                w.write_record(&[
                    entry.delay.to_string(),
                    i.to_string(),
                    s.re.to_string(),
                    s.im.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds `n_zeta + 1` cyclically interpolated ZC replicas on the
/// [`delay_grid`].
pub fn delayed_zc_dictionary(
    spec: &PreambleSpec,
    n_zeta: usize,
    kernel: InterpolationKernel,
) -> Result<ReplicaDictionary> {
    if n_zeta == 0 {
        return Err(Error::InvalidParameter(
            "dictionary needs n_zeta >= 1".into(),
        ));
    }
    let zc = zc_sequence(spec);
    let entries = delay_grid(n_zeta)
        .into_iter()
        .map(|delay| DelayedReplica {
            delay,
            samples: cyclic_delay(&zc, delay, &kernel),
        })
        .collect();
    Ok(ReplicaDictionary { entries, kernel })
}
