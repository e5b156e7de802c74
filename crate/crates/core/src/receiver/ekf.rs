//! Extended Kalman filter over `[phase, normalized CFO]`.
//!
//! The state advances linearly between preambles, `phi += n_cyc * eps`, and
//! is observed through `[cos phi, sin phi, eps]`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Matrix3, Matrix3x2, Vector2, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let y = phi.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Noise covariances shared by every state of one tracker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfNoise {
    /// Per-preamble drift of `[phase, eps]`.
    pub process: Matrix2<f64>,
    /// Noise on `[cos phi, sin phi, eps]` observations.
    pub measurement: Matrix3<f64>,
}

impl EkfNoise {
    /// Diagonal covariances: process `diag(q_phi, q_eps)`, measurement
    /// `diag(r_cos, r_sin, r_eps)`.
    pub fn diagonal(q_phi: f64, q_eps: f64, r_cos: f64, r_sin: f64, r_eps: f64) -> Self {
        Self {
            process: Matrix2::from_diagonal(&Vector2::new(q_phi, q_eps)),
            measurement: Matrix3::from_diagonal(&Vector3::new(r_cos, r_sin, r_eps)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_psd(dyn2(&self.process), "process noise")?;
        check_psd(
            DMatrix::from_column_slice(3, 3, self.measurement.as_slice()),
            "measurement noise",
        )
    }
}

fn dyn2(m: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(2, 2, m.as_slice())
}

fn check_psd(m: DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{what} has non-finite entries"
        )));
    }
    if (&m - m.transpose()).abs().max() > 1e-12 * m.abs().max().max(1.0) {
        return Err(Error::InvalidParameter(format!("{what} is not symmetric")));
    }
    let min_eig = m.symmetric_eigenvalues().min();
    if min_eig < -1e-12 * m.abs().max().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "{what} is not positive semidefinite (eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}

/// Observation vector for one preamble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfMeasurement {
    pub cos_phi: f64,
    pub sin_phi: f64,
    pub eps_f: f64,
}

impl EkfMeasurement {
    /// Phase taken from a received sample scaled to unit magnitude.
    pub fn from_sample(sample: Complex64, eps_f: f64) -> Result<Self> {
        let mag = sample.norm();
        if !(mag > 0.0 && mag.is_finite()) || !eps_f.is_finite() {
            return Err(Error::Degenerate(format!(
                "cannot take a phase observation from sample {sample}"
            )));
        }
        Ok(Self {
            cos_phi: sample.re / mag,
            sin_phi: sample.im / mag,
            eps_f,
        })
    }

    fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.cos_phi, self.sin_phi, self.eps_f)
    }
}

/// Filter state: phase (rad), normalized CFO (rad/sample), and covariances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfState {
    pub phi: f64,
    pub eps_f: f64,
    pub covariance: Matrix2<f64>,
    pub process_noise: Matrix2<f64>,
    pub measurement_noise: Matrix3<f64>,
}

impl EkfState {
    pub fn new(phi: f64, eps_f: f64, covariance: Matrix2<f64>, noise: &EkfNoise) -> Result<Self> {
        noise.validate()?;
        check_psd(dyn2(&covariance), "state covariance")?;
        Ok(Self {
            phi: wrap_phase(phi),
            eps_f,
            covariance,
            process_noise: noise.process,
            measurement_noise: noise.measurement,
        })
    }

    /// Starts a track from the first observation, with the measurement
    /// variances as the initial uncertainty.
    pub fn initialize(z: &EkfMeasurement, noise: &EkfNoise) -> Result<Self> {
        let r = noise.measurement;
        let covariance = Matrix2::new(r[(0, 0)].max(r[(1, 1)]), 0.0, 0.0, r[(2, 2)]);
        Self::new(z.sin_phi.atan2(z.cos_phi), z.eps_f, covariance, noise)
    }

    /// Advances the state across `n_cyc` samples.
    pub fn predict(&self, n_cyc: u64) -> EkfState {
        let f = Matrix2::new(1.0, n_cyc as f64, 0.0, 1.0);
        let x = f * Vector2::new(self.phi, self.eps_f);
        let p = f * self.covariance * f.transpose() + self.process_noise;
        EkfState {
            phi: wrap_phase(x[0]),
            eps_f: x[1],
            covariance: enforce_psd(p),
            ..*self
        }
    }

    /// Measurement update with `g(x) = [cos phi, sin phi, eps]`.
    pub fn update(&self, z: &EkfMeasurement) -> Result<EkfState> {
        let (s_phi, c_phi) = self.phi.sin_cos();
        let g = Vector3::new(c_phi, s_phi, self.eps_f);
        let h = Matrix3x2::new(-s_phi, 0.0, c_phi, 0.0, 0.0, 1.0);
        let p = self.covariance;
        let r = self.measurement_noise;

        let s = h * p * h.transpose() + r;
        let s_inv = s
            .cholesky()
            .map(|c| c.inverse())
            .ok_or(Error::SingularInnovation)?;
        if s_inv.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularInnovation);
        }
        let gain = p * h.transpose() * s_inv;
        let x = Vector2::new(self.phi, self.eps_f) + gain * (z.vector() - g);

        // Joseph form keeps the update symmetric and PSD under rounding.
        let i_kh = Matrix2::identity() - gain * h;
        let p = i_kh * p * i_kh.transpose() + gain * r * gain.transpose();

        Ok(EkfState {
            phi: wrap_phase(x[0]),
            eps_f: x[1],
            covariance: enforce_psd(p),
            ..*self
        })
    }

    pub fn min_covariance_eigenvalue(&self) -> f64 {
        self.covariance.symmetric_eigenvalues().min()
    }
}

/// Symmetrizes and clips negative eigenvalues to zero.
fn enforce_psd(p: Matrix2<f64>) -> Matrix2<f64> {
    let sym = (p + p.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.min() >= 0.0 {
        return sym;
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let rebuilt =
        eig.eigenvectors * Matrix2::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    (rebuilt + rebuilt.transpose()) * 0.5
}

pub fn ekf_predict(state: &EkfState, n_cyc: u64) -> EkfState {
    state.predict(n_cyc)
}

pub fn ekf_update(state: &EkfState, measurement: &EkfMeasurement) -> Result<EkfState> {
    state.update(measurement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_for, Stream};
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn noise() -> EkfNoise {
        EkfNoise::diagonal(1e-6, 1e-10, 0.05, 0.05, 1e-7)
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_phase(1000.0) - (1000.0 - 159.0 * 2.0 * PI)).abs() < 1e-9);
    }

    #[test]
    fn predict_advances_phase() {
        let s = EkfState::new(0.0, 0.001, Matrix2::identity(), &noise()).unwrap();
        let p = s.predict(1000);
        assert!((p.phi - 1.0).abs() < 1e-12);
        assert_eq!(p.eps_f, 0.001);
    }

    #[test]
    fn predict_covariance_hand_product() {
        let quiet = EkfNoise {
            process: Matrix2::zeros(),
            measurement: Matrix3::identity(),
        };
        let s = EkfState::new(0.3, 0.0, Matrix2::identity(), &quiet).unwrap();
        let p = s.predict(2);
        assert_eq!(p.phi, 0.3);
        assert_eq!(p.eps_f, 0.0);
        assert_eq!(p.covariance, Matrix2::new(5.0, 2.0, 2.0, 1.0));
    }

    #[test]
    fn zero_innovation_leaves_state() {
        let s = EkfState::new(0.7, 2e-3, Matrix2::new(0.2, 1e-4, 1e-4, 1e-6), &noise()).unwrap();
        let z = EkfMeasurement {
            cos_phi: 0.7f64.cos(),
            sin_phi: 0.7f64.sin(),
            eps_f: 2e-3,
        };
        let u = s.update(&z).unwrap();
        assert!((u.phi - 0.7).abs() < 1e-15);
        assert!((u.eps_f - 2e-3).abs() < 1e-18);
        assert!(u.covariance[(1, 1)] < s.covariance[(1, 1)]);
    }

    #[test]
    fn huge_cfo_noise_ignores_cfo_measurement() {
        let n = EkfNoise::diagonal(0.0, 0.0, 0.05, 0.05, 1e30);
        let s = EkfState::new(0.2, 1e-3, Matrix2::new(0.1, 0.0, 0.0, 1e-6), &n).unwrap();
        let z = EkfMeasurement {
            cos_phi: 0.2f64.cos(),
            sin_phi: 0.2f64.sin(),
            eps_f: 5e-3,
        };
        let u = s.update(&z).unwrap();
        assert!((u.eps_f - 1e-3).abs() < 1e-6);
    }

    #[test]
    fn singular_innovation_is_reported() {
        let n = EkfNoise {
            process: Matrix2::zeros(),
            measurement: Matrix3::zeros(),
        };
        let s = EkfState::new(0.0, 0.0, Matrix2::zeros(), &n).unwrap();
        let z = EkfMeasurement::from_sample(Complex64::new(1.0, 0.0), 0.0).unwrap();
        assert!(matches!(s.update(&z), Err(Error::SingularInnovation)));
    }

    #[test]
    fn rejects_invalid_covariances() {
        let mut n = noise();
        n.measurement[(0, 0)] = -1.0;
        assert!(n.validate().is_err());
        assert!(EkfState::new(0.0, 0.0, Matrix2::new(1.0, 0.0, 0.5, 1.0), &noise()).is_err());
    }

    #[test]
    fn measurement_normalizes_amplitude() {
        let z = EkfMeasurement::from_sample(Complex64::new(3.0, 4.0), 0.1).unwrap();
        assert!((z.cos_phi - 0.6).abs() < 1e-15 && (z.sin_phi - 0.8).abs() < 1e-15);
        assert!(EkfMeasurement::from_sample(Complex64::new(0.0, 0.0), 0.1).is_err());
    }

    #[test]
    fn repeated_updates_shrink_error() {
        // Constant true CFO, noisy CFO-only information (phase channels are
        // made uninformative), 1000 runs.
        let n = EkfNoise::diagonal(0.0, 0.0, 1e6, 1e6, 1e-8);
        let normal = Normal::new(0.0, 1e-4).unwrap();
        let true_eps = 2e-3;
        let (mut after_one, mut after_twenty) = (0.0, 0.0);
        for run in 0..1000 {
            let mut rng = rng_for(5, run, Stream::MonteCarlo);
            let z = |rng: &mut rand_chacha::ChaCha8Rng| EkfMeasurement {
                cos_phi: 1.0,
                sin_phi: 0.0,
                eps_f: true_eps + normal.sample(rng),
            };
            let mut s = EkfState::initialize(&z(&mut rng), &n).unwrap();
            for k in 1..20 {
                s = s.predict(1).update(&z(&mut rng)).unwrap();
                if k == 1 {
                    after_one += (s.eps_f - true_eps).powi(2);
                }
            }
            after_twenty += (s.eps_f - true_eps).powi(2);
        }
        assert!(after_twenty < after_one, "{after_twenty} vs {after_one}");
        assert!(after_twenty < 0.2 * after_one);
    }

    proptest! {
        #[test]
        fn covariance_stays_psd(
            phis in proptest::collection::vec(-3.0f64..3.0, 1..30),
            eps in proptest::collection::vec(-0.01f64..0.01, 30),
            n_cyc in 1u64..100_000,
            q in 0.0f64..1e-3,
        ) {
            let n = EkfNoise::diagonal(q, q * 1e-4, 0.05, 0.05, 1e-7);
            let mut s = EkfState::new(0.0, 0.0, Matrix2::identity(), &n).unwrap();
            for (phi, e) in phis.iter().zip(&eps) {
                s = s.predict(n_cyc);
                prop_assert!(s.min_covariance_eigenvalue() >= -1e-12);
                prop_assert!((s.covariance - s.covariance.transpose()).abs().max() == 0.0);
                s = s.update(&EkfMeasurement { cos_phi: phi.cos(), sin_phi: phi.sin(), eps_f: *e }).unwrap();
                prop_assert!(s.min_covariance_eigenvalue() >= -1e-12);
                prop_assert!((s.covariance - s.covariance.transpose()).abs().max() == 0.0);
                prop_assert!(s.phi > -PI && s.phi <= PI);
            }
        }
    }
}
