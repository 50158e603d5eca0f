//! Random rotor displacement: `R0 ~ N(0, sigma^2)` truncated to
//! `|R0| < truncation * delta_m`, independent of `theta0 ~ U(0, pi)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::eccentricity::EccentricityState;
use crate::error::{Error, Result};

/// One realization of the uncertain inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Signed displacement R0 (m).
    pub r0: f64,
    /// Displacement direction theta0 (rad).
    pub theta0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomInputModel {
    /// Standard deviation of R0 (m).
    pub sigma_r0: f64,
    /// Upper end of the theta0 support (0, theta_max).
    #[serde(default = "default_theta_max")]
    pub theta_max: f64,
    /// Mean mechanical airgap delta_m (m).
    pub mean_airgap: f64,
    /// Samples with `|R0| >= truncation * delta_m` are rejected.
    #[serde(default = "default_truncation")]
    pub truncation: f64,
}

fn default_theta_max() -> f64 {
    PI
}

fn default_truncation() -> f64 {
    0.99
}

pub const DEFAULT_SIGMA_R0: f64 = 0.4e-3 / 3.0;

impl RandomInputModel {
    pub fn new(sigma_r0: f64, mean_airgap: f64) -> Result<Self> {
        let m = RandomInputModel {
            sigma_r0,
            theta_max: PI,
            mean_airgap,
            truncation: 0.99,
        };
        m.validate()?;
        Ok(m)
    }

    /// `sigma_R0 = 0.4/3 mm` on a machine with airgap `mean_airgap`.
    pub fn with_default_sigma(mean_airgap: f64) -> Result<Self> {
        Self::new(DEFAULT_SIGMA_R0, mean_airgap)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_r0 >= 0.0 && self.sigma_r0.is_finite()) {
            return Err(Error::config("uq.sigma_r0", "must be finite and >= 0"));
        }
        if !(self.mean_airgap > 0.0) {
            return Err(Error::config("uq.mean_airgap", "must be > 0"));
        }
        if !(self.theta_max > 0.0 && self.theta_max <= 2.0 * PI) {
            return Err(Error::config("uq.theta_max", "must lie in (0, 2 pi]"));
        }
        if !(self.truncation > 0.0 && self.truncation < 1.0) {
            return Err(Error::config("uq.truncation", "must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn bound(&self) -> f64 {
        self.truncation * self.mean_airgap
    }

    pub fn admissible(&self, s: &Sample) -> bool {
        s.r0.abs() < self.bound()
    }

    /// Draws one admissible sample; returns it with the number of rejected
    /// draws.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Sample, usize) {
        let normal = Normal::new(0.0, self.sigma_r0).expect("validated sigma");
        let uniform = Uniform::new(0.0, self.theta_max).expect("validated support");
        let mut rejected = 0;
        loop {
            let s = Sample {
                r0: normal.sample(rng),
                theta0: uniform.sample(rng),
            };
            if self.admissible(&s) {
                return (s, rejected);
            }
            rejected += 1;
        }
    }

    pub fn eccentricity(&self, s: &Sample) -> Result<EccentricityState> {
        EccentricityState::new(s.r0, s.theta0, self.mean_airgap)
    }

    /// Variance of R0 (untruncated).
    pub fn r0_variance(&self) -> f64 {
        self.sigma_r0 * self.sigma_r0
    }

    pub fn theta0_mean(&self) -> f64 {
        0.5 * self.theta_max
    }

    pub fn theta0_variance(&self) -> f64 {
        self.theta_max * self.theta_max / 12.0
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn draws_respect_the_truncation() {
        let m = RandomInputModel {
            sigma_r0: 1.0,
            theta_max: PI,
            mean_airgap: 1.0,
            truncation: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rejected = 0;
        for _ in 0..2000 {
            let (s, r) = m.draw(&mut rng);
            assert!(s.r0.abs() < 0.5);
            assert!((0.0..PI).contains(&s.theta0));
            rejected += r;
        }
        // P(|Z| >= 0.5) = 0.617
        let rate = rejected as f64 / (rejected + 2000) as f64;
        assert!((rate - 0.617).abs() < 0.03, "{rate}");
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(RandomInputModel::new(-1.0, 1e-3).is_err());
        assert!(RandomInputModel::new(1e-4, 0.0).is_err());
        assert!(RandomInputModel::with_default_sigma(1e-3).is_ok());
    }
}
