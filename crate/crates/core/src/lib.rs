//! Agent-based simulator of a binary prediction market.
//!
//! Bettors receive noisy signals of a drifting outcome probability, update
//! their valuations with stubbornness and herding, and trade contracts sized
//! by CRRA expected utility. A single high-budget "whale" with a fixed
//! valuation can be injected to study price distortion. The [`theory`]
//! module evaluates the matching closed-form results.
//!
//! ```
//! use predmarket::{run_simulation, SimConfig};
//!
//! let config = SimConfig { n_agents: 20, horizon: 50, ..SimConfig::default() };
//! let traj = run_simulation(&config).unwrap();
//! assert_eq!(traj.steps.len(), 50);
//! assert!(traj.prices().iter().all(|m| *m > 0.0 && *m < 1.0));
//! ```

pub mod agents;
pub mod analysis;
pub mod election;
pub mod error;
pub mod export;
pub mod market;
pub mod rng;
pub mod simulation;
pub mod theory;

pub use agents::{Agent, AgentState, AgentTraits, PopulationSpec, TraitDistribution, WhaleSpec};
pub use error::{Error, Result};
pub use simulation::{
    inject_whale, run_batch, run_indexed, run_simulation, run_sweep, RunMetrics, SimConfig,
    StepRecord, Summary, SweepParameter, SweepResult, SweepSpec, Trajectory,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/outcome.md")]
    mod outcome {}
    #[doc = include_str!("../../../book/src/bettors.md")]
    mod bettors {}
    #[doc = include_str!("../../../book/src/market.md")]
    mod market {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/theory.md")]
    mod theory {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
