//! The true outcome process: a random walk clipped to `[0, 1]`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectionConfig {
    /// Initial outcome probability.
    pub eta0: f64,
    /// Per-step standard deviation of the walk.
    pub sigma_eta: f64,
    /// Number of steps.
    pub horizon: usize,
}

impl ElectionConfig {
    pub fn new(eta0: f64, sigma_eta: f64, horizon: usize) -> Result<Self> {
        let config = ElectionConfig {
            eta0,
            sigma_eta,
            horizon,
        };
        config.validate()?;
        Ok(config)
    }

    /// Builds a config from a per-step *variance*, storing its square root.
    pub fn from_variance(eta0: f64, variance: f64, horizon: usize) -> Result<Self> {
        if !(variance >= 0.0) {
            return Err(Error::config("variance", "must be non-negative"));
        }
        Self::new(eta0, variance.sqrt(), horizon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta0) {
            return Err(Error::config(
                "eta0",
                format!("{} is not in [0, 1]", self.eta0),
            ));
        }
        if !(self.sigma_eta >= 0.0) || !self.sigma_eta.is_finite() {
            return Err(Error::config(
                "sigma_eta",
                format!("{} must be finite and non-negative", self.sigma_eta),
            ));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        Ok(())
    }
}

/// A realised outcome path `eta_0 ..= eta_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectionPath(Vec<f64>);

impl ElectionPath {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn at(&self, t: usize) -> f64 {
        self.0[t]
    }
}

/// One step of the walk, hard-clipped at the bounds.
pub fn step_election<R: Rng + ?Sized>(eta_prev: f64, sigma_eta: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (eta_prev + sigma_eta * z).clamp(0.0, 1.0)
}

pub fn generate_path<R: Rng + ?Sized>(config: &ElectionConfig, rng: &mut R) -> ElectionPath {
    let mut values = Vec::with_capacity(config.horizon + 1);
    let mut eta = config.eta0;
    values.push(eta);
    for _ in 0..config.horizon {
        eta = step_election(eta, config.sigma_eta, rng);
        values.push(eta);
    }
    ElectionPath(values)
}
