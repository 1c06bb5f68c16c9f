use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{Agent, AgentState, AgentTraits};
use crate::error::{Error, Result};

/// How one attribute is drawn across the population.
///
/// Every distribution consumes exactly one uniform draw and maps it through
/// its quantile function, so swapping one distribution for another keeps the
/// rest of the random stream aligned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TraitDistribution {
    Constant(f64),
    Normal { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
}

impl TraitDistribution {
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            TraitDistribution::Constant(v) => v,
            TraitDistribution::Normal { mean, std } => {
                if std == 0.0 {
                    mean
                } else {
                    mean + std * standard_normal_quantile(u)
                }
            }
            TraitDistribution::Uniform { low, high } => low + (high - low) * u,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.quantile(u)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            TraitDistribution::Constant(v) => v,
            TraitDistribution::Normal { mean, .. } => mean,
            TraitDistribution::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    /// Moves the centre to `mean` while keeping the spread.
    ///
    /// Uniforms keep their half-width but shrink it as needed so the support
    /// stays inside `[0, 1]`.
    pub fn with_mean(&self, mean: f64) -> Self {
        match *self {
            TraitDistribution::Constant(_) => TraitDistribution::Constant(mean),
            TraitDistribution::Normal { std, .. } => TraitDistribution::Normal { mean, std },
            TraitDistribution::Uniform { low, high } => {
                let half = (0.5 * (high - low)).min(mean).min(1.0 - mean).max(0.0);
                TraitDistribution::Uniform {
                    low: mean - half,
                    high: mean + half,
                }
            }
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        let ok = match *self {
            TraitDistribution::Constant(v) => v.is_finite(),
            TraitDistribution::Normal { mean, std } => {
                mean.is_finite() && std.is_finite() && std >= 0.0
            }
            TraitDistribution::Uniform { low, high } => {
                low.is_finite() && high.is_finite() && low <= high
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(
                field,
                format!("invalid distribution {self:?}"),
            ))
        }
    }
}

fn standard_normal_quantile(u: f64) -> f64 {
    Normal::standard().inverse_cdf(u)
}

/// Distributions for every bettor attribute. Defaults follow the usual
/// heterogeneous population: `B ~ U(100, 1000)`, `V ~ N(0.5, 0.05)`,
/// `s ~ N(0.3, 0.05)`, `e ~ N(0.9, 0.04)`, `b = 0`, `r ~ U(0, 1)`, `h = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSpec {
    pub budget: TraitDistribution,
    pub valuation: TraitDistribution,
    pub stubbornness: TraitDistribution,
    pub expertise: TraitDistribution,
    pub bias: TraitDistribution,
    pub risk_aversion: TraitDistribution,
    pub herding: TraitDistribution,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            budget: TraitDistribution::Uniform {
                low: 100.0,
                high: 1000.0,
            },
            valuation: TraitDistribution::Normal {
                mean: 0.5,
                std: 0.05,
            },
            stubbornness: TraitDistribution::Normal {
                mean: 0.3,
                std: 0.05,
            },
            expertise: TraitDistribution::Normal {
                mean: 0.9,
                std: 0.04,
            },
            bias: TraitDistribution::Constant(0.0),
            risk_aversion: TraitDistribution::Uniform {
                low: 0.0,
                high: 1.0,
            },
            herding: TraitDistribution::Constant(0.0),
        }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        self.budget.validate("population.budget")?;
        self.valuation.validate("population.valuation")?;
        self.stubbornness.validate("population.stubbornness")?;
        self.expertise.validate("population.expertise")?;
        self.bias.validate("population.bias")?;
        self.risk_aversion.validate("population.risk_aversion")?;
        self.herding.validate("population.herding")
    }

    /// Draws `n` ordinary (non-whale) bettors. Attributes are clipped to
    /// `[0, 1]`, bias to `[-1, 1]` and budgets to be non-negative.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Agent> {
        (0..n)
            .map(|id| {
                let budget = self.budget.sample(rng).max(0.0);
                let valuation = unit(self.valuation.sample(rng));
                let traits = AgentTraits {
                    stubbornness: unit(self.stubbornness.sample(rng)),
                    expertise: unit(self.expertise.sample(rng)),
                    bias: self.bias.sample(rng).clamp(-1.0, 1.0),
                    risk_aversion: unit(self.risk_aversion.sample(rng)),
                    herding: unit(self.herding.sample(rng)),
                    is_whale: false,
                };
                Agent {
                    id,
                    traits,
                    state: AgentState {
                        budget,
                        holdings: 0.0,
                        valuation,
                    },
                    initial_budget: budget,
                }
            })
            .collect()
    }
}

fn unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}
