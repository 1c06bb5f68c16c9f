//! Built-in experiment setups.

use predmarket::simulation::grid;
use predmarket::{inject_whale, SimConfig, SweepParameter, SweepSpec, TraitDistribution};

pub const ATTRIBUTE_REPS: usize = 30;
pub const WHALE_REPS: usize = 100;
pub const HERDING_REPS: usize = 100;

/// Whale valuation in the capital-share sweep: 0.1 above the starting outcome.
pub const WHALE_VALUATION: f64 = 0.6;
pub const STEADY_STATE_RHO: f64 = 0.5;
pub const STEADY_STATE_DELTAS: [f64; 5] = [0.0, 0.05, 0.1, 0.15, 0.2];

pub const HERDING_LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const HERDING_RHO: f64 = 0.3;
/// Recovery runs open with the price already pushed to the whale valuation.
pub const HERDING_SHOCK_PRICE: f64 = 0.6;
pub const HERDING_OUTCOME: f64 = 0.5;
pub const SNAPSHOT_TIMES: [usize; 3] = [20, 50, 100];

pub const DEFAULT_ALPHAS: [f64; 4] = [0.01, 0.1, 0.5, 0.9];

pub fn attribute_sweeps() -> Vec<SweepSpec> {
    vec![
        SweepSpec {
            parameter: SweepParameter::Stubbornness,
            values: grid(0.0, 1.0, 0.1),
        },
        SweepSpec {
            parameter: SweepParameter::Expertise,
            values: grid(0.0, 1.0, 0.1),
        },
        SweepSpec {
            parameter: SweepParameter::Bias,
            values: grid(-0.5, 0.5, 0.1),
        },
        SweepSpec {
            parameter: SweepParameter::RiskAversion,
            values: grid(0.0, 1.0, 0.1),
        },
        SweepSpec {
            parameter: SweepParameter::BudgetStd,
            values: grid(0.0, 500.0, 50.0),
        },
    ]
}

/// Every ordinary bettor has expertise 0.95.
pub fn expert_base(seed: u64) -> SimConfig {
    let mut c = SimConfig {
        master_seed: seed,
        ..SimConfig::default()
    };
    c.population.expertise = TraitDistribution::Constant(0.95);
    c
}

pub fn whale_config(seed: u64, rho: f64) -> SimConfig {
    inject_whale(&expert_base(seed), rho, WHALE_VALUATION)
}

pub fn whale_grid() -> SweepSpec {
    SweepSpec {
        parameter: SweepParameter::Rho,
        values: grid(0.0, 0.9, 0.1),
    }
}

/// A fixed outcome, so the late-window error isolates the whale's pull.
pub fn steady_state_config(seed: u64, delta: f64) -> SimConfig {
    let base = SimConfig {
        sigma_eta: 0.0,
        ..expert_base(seed)
    };
    inject_whale(&base, STEADY_STATE_RHO, base.initial_price + delta)
}

pub fn herding_config(seed: u64, h: f64) -> SimConfig {
    let mut c = SimConfig {
        master_seed: seed,
        sigma_eta: 0.0,
        initial_price: HERDING_SHOCK_PRICE,
        eta0: Some(HERDING_OUTCOME),
        ..SimConfig::default()
    };
    c.population.expertise = TraitDistribution::Constant(0.9);
    c.population.herding = TraitDistribution::Constant(h);
    inject_whale(&c, HERDING_RHO, HERDING_SHOCK_PRICE)
}
