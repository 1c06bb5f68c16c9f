//! The step loop, whale injection and Monte Carlo sweeps.
//!
//! One step runs: private signals, valuation updates, order collection,
//! randomised matching, settlement at the posted price, the net-demand price
//! update, then the outcome walk advances.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{
    draw_signal, update_valuation, Agent, AgentState, AgentTraits, PopulationSpec,
    TraitDistribution, WhaleSpec,
};
use crate::analysis::{self, Resolution};
use crate::election::{generate_path, ElectionConfig};
use crate::error::{Error, Result};
use crate::market::{collect_orders, match_orders, settle_fills, update_price, MarketState};
use crate::rng::{stream, Stream};

/// Per-agent snapshots are kept only for populations up to this size.
pub const SNAPSHOT_LIMIT: usize = 1000;

/// Trailing window used for the late-window price error.
pub const LATE_WINDOW: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Number of ordinary bettors (a whale, if any, is extra).
    pub n_agents: usize,
    pub horizon: usize,
    /// `m_0`.
    pub initial_price: f64,
    /// Starting outcome; `None` starts the walk at `initial_price`. Setting
    /// it apart from the price models a market that opens mispriced.
    pub eta0: Option<f64>,
    /// Per-step standard deviation of the outcome walk.
    pub sigma_eta: f64,
    pub lambda: f64,
    pub population: PopulationSpec,
    pub whale: Option<WhaleSpec>,
    /// Optional cap on the absolute size of any single order.
    pub max_order_volume: Option<f64>,
    pub master_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_agents: 100,
            horizon: 100,
            initial_price: 0.5,
            eta0: None,
            sigma_eta: 0.05,
            lambda: 0.05,
            population: PopulationSpec::default(),
            whale: None,
            max_order_volume: None,
            master_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::config("n_agents", "must be at least 1"));
        }
        MarketState::new(self.initial_price, self.lambda)?;
        self.election().validate()?;
        self.population.validate()?;
        if let Some(whale) = &self.whale {
            whale.validate()?;
        }
        if let Some(cap) = self.max_order_volume {
            if !(cap > 0.0) {
                return Err(Error::config("max_order_volume", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn election(&self) -> ElectionConfig {
        ElectionConfig {
            eta0: self.eta0.unwrap_or(self.initial_price),
            sigma_eta: self.sigma_eta,
            horizon: self.horizon,
        }
    }
}

/// Adds a whale holding `rho` of total capital with fixed valuation `w`.
pub fn inject_whale(config: &SimConfig, rho: f64, w: f64) -> SimConfig {
    let mut out = config.clone();
    let risk_aversion = config.whale.map_or(1.0, |wh| wh.risk_aversion);
    out.whale = Some(WhaleSpec {
        budget_fraction: rho,
        valuation: w,
        risk_aversion,
    });
    out
}

/// Draws the population for one run.
///
/// With a whale, the ordinary budgets are scaled by `1 - rho` and the whale
/// receives `rho` of the drawn total, so total capital is unchanged. The
/// whale is appended last and consumes no randomness.
pub fn build_population(config: &SimConfig, run_index: u64) -> Vec<Agent> {
    let mut rng = stream(config.master_seed, run_index, Stream::Population);
    let mut agents = config.population.sample(config.n_agents, &mut rng);
    if let Some(whale) = config.whale {
        let total: f64 = agents.iter().map(|a| a.state.budget).sum();
        let keep = 1.0 - whale.budget_fraction;
        for a in agents.iter_mut() {
            a.state.budget *= keep;
            a.initial_budget = a.state.budget;
        }
        let budget = whale.budget_fraction * total;
        agents.push(Agent {
            id: agents.len(),
            traits: AgentTraits {
                stubbornness: 1.0,
                expertise: 0.0,
                bias: 0.0,
                risk_aversion: whale.risk_aversion,
                herding: 0.0,
                is_whale: true,
            },
            state: AgentState {
                budget,
                holdings: 0.0,
                valuation: whale.valuation,
            },
            initial_budget: budget,
        });
    }
    agents
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    /// 1-based step index; values are those in force after the step.
    pub t: usize,
    pub price: f64,
    pub eta: f64,
    pub net_demand: f64,
    pub gross_volume: f64,
    /// Mean valuation of ordinary bettors when orders were placed.
    pub mean_valuation: f64,
    /// Open interest: total long contracts outstanding.
    pub total_contracts: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub run_index: u64,
    pub initial_price: f64,
    pub steps: Vec<StepRecord>,
    /// Sum of initial budgets.
    pub total_capital: f64,
    pub initial_agents: Vec<Agent>,
    pub final_agents: Vec<Agent>,
    /// Per-step agent states; empty above [`SNAPSHOT_LIMIT`] agents.
    pub snapshots: Vec<Vec<AgentState>>,
}

impl Trajectory {
    pub fn prices(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.price).collect()
    }

    pub fn etas(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.eta).collect()
    }

    pub fn final_eta(&self) -> f64 {
        self.steps.last().map_or(self.initial_price, |s| s.eta)
    }

    pub fn whale(&self) -> Option<&Agent> {
        self.final_agents.iter().find(|a| a.is_whale())
    }
}

pub fn run_simulation(config: &SimConfig) -> Result<Trajectory> {
    run_indexed(config, 0)
}

/// Runs replicate `run_index` of `config`. The result is a pure function of
/// `(config, run_index)`.
pub fn run_indexed(config: &SimConfig, run_index: u64) -> Result<Trajectory> {
    config.validate()?;
    let seed = config.master_seed;
    let path = generate_path(
        &config.election(),
        &mut stream(seed, run_index, Stream::Election),
    );
    let mut signals = stream(seed, run_index, Stream::Signals);
    let mut matching = stream(seed, run_index, Stream::Matching);

    let mut agents = build_population(config, run_index);
    let initial_agents = agents.clone();
    let total_capital = agents.iter().map(|a| a.state.budget).sum();
    let keep_snapshots = agents.len() <= SNAPSHOT_LIMIT;
    let ordinary = agents.iter().filter(|a| !a.is_whale()).count() as f64;

    let mut market = MarketState::new(config.initial_price, config.lambda)?;
    let mut steps = Vec::with_capacity(config.horizon);
    let mut snapshots = Vec::new();

    for t in 0..config.horizon {
        let eta = path.at(t);
        for agent in agents.iter_mut().filter(|a| !a.is_whale()) {
            let signal = draw_signal(eta, agent.traits.expertise, &mut signals);
            agent.state.valuation =
                update_valuation(&agent.state, &agent.traits, signal, market.price)?;
        }
        let mean_valuation = agents
            .iter()
            .filter(|a| !a.is_whale())
            .map(|a| a.state.valuation)
            .sum::<f64>()
            / ordinary;

        let book = collect_orders(&agents, &market, config.max_order_volume);
        let fills = match_orders(&book, market.price, &mut matching);
        settle_fills(&mut agents, &fills, market.price)?;
        market = update_price(&market, book.net_demand(), book.gross_volume());

        steps.push(StepRecord {
            t: t + 1,
            price: market.price,
            eta: path.at(t + 1),
            net_demand: book.net_demand(),
            gross_volume: book.gross_volume(),
            mean_valuation,
            total_contracts: agents.iter().map(|a| a.state.holdings.max(0.0)).sum(),
        });
        if keep_snapshots {
            snapshots.push(agents.iter().map(|a| a.state).collect());
        }
    }

    Ok(Trajectory {
        run_index,
        initial_price: config.initial_price,
        steps,
        total_capital,
        initial_agents,
        final_agents: agents,
        snapshots,
    })
}

/// Runs `replications` copies of every config on a pool of `threads` workers
/// (0 picks the rayon default) and maps each trajectory through `reduce`.
///
/// Replicate `k` of every config uses run index `k`, so cells of a sweep see
/// common random numbers. Output order never depends on scheduling.
pub fn run_batch<T, F>(
    configs: &[SimConfig],
    replications: usize,
    threads: usize,
    reduce: F,
) -> Result<Vec<Vec<T>>>
where
    T: Send,
    F: Fn(&Trajectory) -> Result<T> + Sync,
{
    for c in configs {
        c.validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|cell| (0..replications).map(move |rep| (cell, rep)))
        .collect();
    let work = || {
        jobs.par_iter()
            .map(|&(cell, rep)| {
                run_indexed(&configs[cell], rep as u64).and_then(|traj| reduce(&traj))
            })
            .collect::<Vec<Result<T>>>()
    };
    let results = if threads == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(work)
    };

    let mut out: Vec<Vec<T>> = (0..configs.len())
        .map(|_| Vec::with_capacity(replications))
        .collect();
    for ((cell, _), r) in jobs.iter().zip(results) {
        out[*cell].push(r?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Stubbornness,
    Expertise,
    Bias,
    RiskAversion,
    Herding,
    BudgetStd,
    Rho,
    WhaleBias,
    Lambda,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 9] = [
        SweepParameter::Stubbornness,
        SweepParameter::Expertise,
        SweepParameter::Bias,
        SweepParameter::RiskAversion,
        SweepParameter::Herding,
        SweepParameter::BudgetStd,
        SweepParameter::Rho,
        SweepParameter::WhaleBias,
        SweepParameter::Lambda,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Stubbornness => "stubbornness",
            SweepParameter::Expertise => "expertise",
            SweepParameter::Bias => "bias",
            SweepParameter::RiskAversion => "risk_aversion",
            SweepParameter::Herding => "herding",
            SweepParameter::BudgetStd => "budget_std",
            SweepParameter::Rho => "rho",
            SweepParameter::WhaleBias => "whale_bias",
            SweepParameter::Lambda => "lambda",
        }
    }

    /// Returns `base` with this parameter set to `value`.
    ///
    /// Trait parameters move the mean of the trait distribution. `budget_std`
    /// switches budgets to a normal around the current mean. `rho` adds a
    /// whale valued 0.1 above the initial price if none is configured.
    /// `whale_bias` sets the whale valuation to `initial_price + value`.
    pub fn apply(&self, base: &SimConfig, value: f64) -> Result<SimConfig> {
        let mut c = base.clone();
        let p = &mut c.population;
        match self {
            SweepParameter::Stubbornness => p.stubbornness = p.stubbornness.with_mean(value),
            SweepParameter::Expertise => p.expertise = p.expertise.with_mean(value),
            SweepParameter::Bias => p.bias = p.bias.with_mean(value),
            SweepParameter::RiskAversion => p.risk_aversion = p.risk_aversion.with_mean(value),
            SweepParameter::Herding => p.herding = p.herding.with_mean(value),
            SweepParameter::BudgetStd => {
                p.budget = TraitDistribution::Normal {
                    mean: p.budget.mean(),
                    std: value,
                }
            }
            SweepParameter::Rho => {
                let w = base
                    .whale
                    .map_or((base.initial_price + 0.1).min(1.0), |w| w.valuation);
                c = inject_whale(&c, value, w);
            }
            SweepParameter::WhaleBias => {
                let whale = base.whale.ok_or_else(|| {
                    Error::config("whale", "whale_bias sweep needs a configured whale")
                })?;
                c = inject_whale(
                    &c,
                    whale.budget_fraction,
                    (base.initial_price + value).clamp(0.0, 1.0),
                );
            }
            SweepParameter::Lambda => c.lambda = value,
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParameter::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownParameter(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// Inclusive grid `start, start + step, ..., stop`, rounded to 12 decimals.
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

/// Run-level summary metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    pub mse: f64,
    pub dominant_lag: usize,
    /// `m_T - eta_T`.
    pub terminal_error: f64,
    /// Mean signed `m_t - eta_t` over the last [`LATE_WINDOW`] steps.
    pub late_error: f64,
    /// Median ordinary-bettor return over total initial capital.
    pub median_return: f64,
    /// Whale return over total initial capital.
    pub whale_return: Option<f64>,
}

impl RunMetrics {
    pub const NAMES: [&'static str; 6] = [
        "mse",
        "dominant_lag",
        "terminal_error",
        "late_error",
        "median_return",
        "whale_return",
    ];

    pub fn from_trajectory(traj: &Trajectory) -> Result<Self> {
        let prices = traj.prices();
        let etas = traj.etas();
        let mse = analysis::mse(&prices, &etas)?;
        let dominant_lag = if prices.len() >= 5 {
            let max_lag = analysis::DEFAULT_MAX_LAG.min(prices.len() - 4);
            analysis::dominant_lag(&prices, &etas, max_lag)?.dominant_lag
        } else {
            0
        };
        let errors: Vec<f64> = prices.iter().zip(&etas).map(|(m, e)| m - e).collect();
        let window = LATE_WINDOW.min(errors.len());
        let late_error = errors[errors.len() - window..].iter().sum::<f64>() / window as f64;
        let profit = analysis::agent_returns(traj, Resolution::MarkToOutcome);
        Ok(RunMetrics {
            mse,
            dominant_lag,
            terminal_error: *errors.last().unwrap_or(&0.0),
            late_error,
            median_return: profit.median_normalized_return,
            whale_return: profit.whale_normalized_return,
        })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "mse" => Some(self.mse),
            "dominant_lag" => Some(self.dominant_lag as f64),
            "terminal_error" => Some(self.terminal_error),
            "late_error" => Some(self.late_error),
            "median_return" => Some(self.median_return),
            "whale_return" => self.whale_return,
            _ => None,
        }
    }
}

/// Mean with a 95% empirical interval (2.5th and 97.5th percentiles).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        if values.is_empty() {
            return Summary {
                mean: f64::NAN,
                lower: f64::NAN,
                upper: f64::NAN,
            };
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Summary {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            lower: analysis::quantile_sorted(&sorted, 0.025),
            upper: analysis::quantile_sorted(&sorted, 0.975),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub value: f64,
    pub runs: Vec<RunMetrics>,
}

impl SweepCell {
    pub fn values(&self, metric: &str) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.get(metric)).collect()
    }

    pub fn summary(&self, metric: &str) -> Summary {
        Summary::of(&self.values(metric))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub replications: usize,
    pub cells: Vec<SweepCell>,
}

pub fn run_sweep(
    base: &SimConfig,
    sweep: &SweepSpec,
    replications: usize,
    threads: usize,
) -> Result<SweepResult> {
    let configs = sweep
        .values
        .iter()
        .map(|&v| sweep.parameter.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    let runs = run_batch(&configs, replications, threads, RunMetrics::from_trajectory)?;
    Ok(SweepResult {
        parameter: sweep.parameter,
        replications,
        cells: sweep
            .values
            .iter()
            .zip(runs)
            .map(|(&value, runs)| SweepCell { value, runs })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            n_agents: 20,
            horizon: 30,
            master_seed: 17,
            ..SimConfig::default()
        }
    }

    #[test]
    fn fair_single_agent_keeps_price() {
        let config = SimConfig {
            n_agents: 1,
            horizon: 50,
            sigma_eta: 0.0,
            population: PopulationSpec {
                valuation: TraitDistribution::Constant(0.5),
                expertise: TraitDistribution::Constant(1.0),
                stubbornness: TraitDistribution::Constant(0.3),
                ..PopulationSpec::default()
            },
            ..SimConfig::default()
        };
        let traj = run_simulation(&config).unwrap();
        assert!(traj
            .steps
            .iter()
            .all(|s| s.price == 0.5 && s.eta == 0.5 && s.gross_volume == 0.0));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let a = run_simulation(&small()).unwrap();
        let b = run_simulation(&small()).unwrap();
        assert_eq!(a, b);
        let c = run_indexed(&small(), 1).unwrap();
        assert_ne!(a.steps, c.steps);
    }

    #[test]
    fn series_lengths_match_horizon() {
        let traj = run_simulation(&small()).unwrap();
        assert_eq!(traj.steps.len(), 30);
        assert_eq!(traj.snapshots.len(), 30);
        assert_eq!(traj.steps.last().unwrap().t, 30);
    }

    #[test]
    fn cash_and_contracts_are_conserved_every_step() {
        let config = inject_whale(&small(), 0.4, 0.65);
        let traj = run_simulation(&config).unwrap();
        for snap in &traj.snapshots {
            let cash: f64 = snap.iter().map(|s| s.budget).sum();
            let contracts: f64 = snap.iter().map(|s| s.holdings).sum();
            assert!((cash - traj.total_capital).abs() < 1e-8 * traj.total_capital);
            assert!(contracts.abs() < 1e-8 * traj.total_capital);
            assert!(snap
                .iter()
                .all(|s| s.budget >= 0.0 && s.budget + s.holdings >= 0.0));
        }
    }

    #[test]
    fn whale_budget_ratio() {
        let config = inject_whale(&SimConfig::default(), 0.5, 0.6);
        let agents = build_population(&config, 0);
        assert_eq!(agents.len(), 101);
        let whale = agents.last().unwrap();
        assert!(whale.is_whale());
        let mean_other = agents[..100].iter().map(|a| a.state.budget).sum::<f64>() / 100.0;
        assert!((whale.state.budget / mean_other - 100.0).abs() < 1e-9);

        let total: f64 = agents.iter().map(|a| a.state.budget).sum();
        let plain: f64 = build_population(&SimConfig::default(), 0)
            .iter()
            .map(|a| a.state.budget)
            .sum();
        assert!((total - plain).abs() < 1e-9 * plain);
    }

    #[test]
    fn whale_valuation_is_fixed() {
        let config = inject_whale(&small(), 0.3, 0.6);
        let traj = run_simulation(&config).unwrap();
        assert_eq!(traj.whale().unwrap().state.valuation, 0.6);
    }

    #[test]
    fn zero_budget_whale_is_inert() {
        let plain = run_simulation(&small()).unwrap();
        let whale = run_simulation(&inject_whale(&small(), 0.0, 0.9)).unwrap();
        assert_eq!(plain.steps, whale.steps);
        assert_eq!(whale.whale().unwrap().state.holdings, 0.0);
    }

    #[test]
    fn sweep_parameters_round_trip_names() {
        for p in SweepParameter::ALL {
            assert_eq!(p.name().parse::<SweepParameter>().unwrap(), p);
        }
        assert!(matches!(
            "charisma".parse::<SweepParameter>(),
            Err(Error::UnknownParameter(_))
        ));
    }

    #[test]
    fn whale_bias_needs_a_whale() {
        assert!(SweepParameter::WhaleBias.apply(&small(), 0.1).is_err());
        let c = SweepParameter::WhaleBias
            .apply(&inject_whale(&small(), 0.5, 0.6), 0.15)
            .unwrap();
        assert!((c.whale.unwrap().valuation - 0.65).abs() < 1e-12);
    }

    #[test]
    fn grid_is_inclusive_and_clean() {
        let g = grid(0.0, 1.0, 0.1);
        assert_eq!(g.len(), 11);
        assert_eq!(g[3], 0.3);
        assert_eq!(g[10], 1.0);
    }

    #[test]
    fn single_cell_sweep_matches_single_run() {
        let spec = SweepSpec {
            parameter: SweepParameter::Stubbornness,
            values: vec![0.3],
        };
        let result = run_sweep(&small(), &spec, 1, 1).unwrap();
        assert_eq!(result.cells.len(), 1);
        assert_eq!(result.cells[0].runs.len(), 1);
        let direct = RunMetrics::from_trajectory(
            &run_simulation(&SweepParameter::Stubbornness.apply(&small(), 0.3).unwrap()).unwrap(),
        )
        .unwrap();
        assert_eq!(result.cells[0].runs[0], direct);
    }

    #[test]
    fn batch_is_independent_of_thread_count() {
        let configs = vec![small(), inject_whale(&small(), 0.3, 0.6)];
        let one = run_batch(&configs, 4, 1, |t| Ok(t.prices())).unwrap();
        let many = run_batch(&configs, 4, 3, |t| Ok(t.prices())).unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn invalid_config_is_reported_by_field() {
        let bad = SimConfig {
            initial_price: 1.0,
            ..small()
        };
        match run_simulation(&bad) {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "initial_price"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn outcome_can_start_away_from_price() {
        let cfg = SimConfig {
            sigma_eta: 0.0,
            initial_price: 0.6,
            eta0: Some(0.5),
            ..small()
        };
        let traj = run_simulation(&cfg).unwrap();
        assert!(traj.etas().iter().all(|&e| e == 0.5));
        let bad = SimConfig {
            eta0: Some(1.5),
            ..small()
        };
        assert!(matches!(
            run_simulation(&bad),
            Err(Error::InvalidConfig { .. })
        ));
    }
}
