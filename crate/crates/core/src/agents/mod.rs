//! Bettors: traits, private signals, belief updating and order sizing.

mod population;
mod utility;

pub use population::{PopulationSpec, TraitDistribution};
pub use utility::{
    crra_utility, expected_utility, feasible_order_bounds, linearized_order, marginal_utility,
    optimal_order, optimal_order_log, FEASIBILITY_FLOOR,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed behavioural attributes of a bettor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentTraits {
    pub stubbornness: f64,
    pub expertise: f64,
    pub bias: f64,
    pub risk_aversion: f64,
    pub herding: f64,
    pub is_whale: bool,
}

/// Resources that evolve as the agent trades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    /// Cash.
    pub budget: f64,
    /// Signed contract position.
    pub holdings: f64,
    pub valuation: f64,
}

impl AgentState {
    /// Wealth with contracts marked at `price`.
    pub fn marked_wealth(&self, price: f64) -> f64 {
        self.budget + self.holdings * price
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: usize,
    pub traits: AgentTraits,
    pub state: AgentState,
    pub initial_budget: f64,
}

impl Agent {
    pub fn is_whale(&self) -> bool {
        self.traits.is_whale
    }
}

/// A capital-heavy bettor with a fixed valuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhaleSpec {
    /// Share `rho` of total market capital held by the whale.
    pub budget_fraction: f64,
    /// Fixed valuation `W`.
    pub valuation: f64,
    #[serde(default = "default_whale_risk_aversion")]
    pub risk_aversion: f64,
}

fn default_whale_risk_aversion() -> f64 {
    1.0
}

impl WhaleSpec {
    pub fn new(budget_fraction: f64, valuation: f64) -> Self {
        WhaleSpec {
            budget_fraction,
            valuation,
            risk_aversion: default_whale_risk_aversion(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.budget_fraction) {
            return Err(Error::config(
                "whale.budget_fraction",
                format!("{} is not in [0, 1)", self.budget_fraction),
            ));
        }
        if !(0.0..=1.0).contains(&self.valuation) {
            return Err(Error::config(
                "whale.valuation",
                format!("{} is not in [0, 1]", self.valuation),
            ));
        }
        if !(self.risk_aversion >= 0.0) {
            return Err(Error::config("whale.risk_aversion", "must be non-negative"));
        }
        Ok(())
    }
}

/// Draws a private signal `M ~ N(eta, 1 - e)`. The signal is left unclipped.
pub fn draw_signal<R: Rng + ?Sized>(eta: f64, expertise: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    eta + (1.0 - expertise).max(0.0).sqrt() * z
}

/// Blends the bias-corrected signal with the previous valuation, then pulls
/// the result toward the posted price by the herding weight.
///
/// With `herding == 0` this is plain adaptive updating
/// `(1 - s)(M - b) + s V`; with `herding == 1` the agent adopts the price.
pub fn update_valuation(
    state: &AgentState,
    traits: &AgentTraits,
    signal: f64,
    market_price: f64,
) -> Result<f64> {
    if traits.is_whale {
        return Err(Error::WhaleUpdate);
    }
    let s = traits.stubbornness;
    let h = traits.herding;
    let own = (1.0 - s) * (signal - traits.bias) + s * state.valuation;
    Ok(((1.0 - h) * own + h * market_price).clamp(0.0, 1.0))
}
