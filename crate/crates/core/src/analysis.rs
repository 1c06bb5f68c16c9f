//! Evaluation metrics for simulated trajectories.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::simulation::Trajectory;

/// Largest lag scanned by [`dominant_lag`] when none is given.
pub const DEFAULT_MAX_LAG: usize = 20;

/// Times at which absolute-error snapshots are reported.
pub const SNAPSHOT_TIMES: [usize; 3] = [20, 50, 100];

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::TooFewObservations { needed: 1, got: 0 });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsFit {
    pub intercept: f64,
    pub slope: f64,
    pub t_stat: f64,
    /// Two-sided p-value for a zero slope, `n - 2` degrees of freedom.
    pub p_value: f64,
}

/// Simple regression `y = a + beta x`.
pub fn ols_slope_pvalue(x: &[f64], y: &[f64]) -> Result<OlsFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewObservations { needed: 3, got: n });
    }
    let nf = n as f64;
    let x_bar = x.iter().sum::<f64>() / nf;
    let y_bar = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - x_bar) * (xi - x_bar);
        sxy += (xi - x_bar) * (yi - y_bar);
    }
    let scale = x
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    if sxx <= nf * (f64::EPSILON * scale).powi(2) {
        return Err(Error::DegenerateRegressor);
    }
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - intercept - slope * xi).powi(2))
        .sum();
    let df = nf - 2.0;
    let se = (rss / df / sxx).sqrt();
    let t_stat = slope / se;
    let p_value = if t_stat.is_nan() {
        1.0
    } else if t_stat.is_infinite() {
        0.0
    } else {
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * dist.sf(t_stat.abs())).min(1.0)
    };
    Ok(OlsFit {
        intercept,
        slope,
        t_stat,
        p_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagFit {
    pub lag: usize,
    pub slope: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagRegressionResult {
    pub dominant_lag: usize,
    pub slope: f64,
    pub p_value: f64,
    pub table: Vec<LagFit>,
}

/// Regresses `eta_t` on `m_{t - lag}` for every lag in `0..=max_lag` and
/// returns the lag with the smallest slope p-value.
///
/// Ties go to the smaller lag, except that p-values which underflow to zero
/// are separated by the size of the t-statistic. A lag whose regressor is
/// constant scores `p = 1`.
pub fn dominant_lag(prices: &[f64], etas: &[f64], max_lag: usize) -> Result<LagRegressionResult> {
    if prices.len() != etas.len() {
        return Err(Error::LengthMismatch(prices.len(), etas.len()));
    }
    let n = prices.len();
    if n <= max_lag + 3 {
        return Err(Error::SeriesTooShort { len: n, max_lag });
    }
    let mut table = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let fit = match ols_slope_pvalue(&prices[..n - lag], &etas[lag..]) {
            Ok(fit) => LagFit {
                lag,
                slope: fit.slope,
                t_stat: fit.t_stat,
                p_value: fit.p_value,
            },
            Err(Error::DegenerateRegressor) => LagFit {
                lag,
                slope: 0.0,
                t_stat: 0.0,
                p_value: 1.0,
            },
            Err(e) => return Err(e),
        };
        table.push(fit);
    }
    let mut best = table[0];
    for fit in &table[1..] {
        let better = fit.p_value < best.p_value
            || (fit.p_value == 0.0 && best.p_value == 0.0 && fit.t_stat.abs() > best.t_stat.abs());
        if better {
            best = *fit;
        }
    }
    Ok(LagRegressionResult {
        dominant_lag: best.lag,
        slope: best.slope,
        p_value: best.p_value,
        table,
    })
}

/// `P(X > 1/2)` for `X ~ N(mean, sd^2)`; a point mass when `sd == 0`.
fn prob_above_half(mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        if mean > 0.5 {
            1.0
        } else if mean < 0.5 {
            0.0
        } else {
            0.5
        }
    } else {
        Normal::standard().cdf((mean - 0.5) / sd)
    }
}

/// Probability that a noisy price and a noisy outcome fall on opposite sides
/// of one half, treating both as independent normals.
pub fn misclassification_prob(price: f64, eta: f64, sigma_m: f64, sigma_eta: f64) -> f64 {
    let m_up = prob_above_half(price, sigma_m);
    let e_up = prob_above_half(eta, sigma_eta);
    m_up * (1.0 - e_up) + (1.0 - m_up) * e_up
}

/// Dense `resolution x resolution` grid over `[0, 1]^2` of
/// `(price, eta, probability)` rows.
pub fn misclassification_grid(
    resolution: usize,
    sigma_m: f64,
    sigma_eta: f64,
) -> Vec<(f64, f64, f64)> {
    let axis = linspace(resolution);
    let mut rows = Vec::with_capacity(resolution * resolution);
    for &m in &axis {
        for &e in &axis {
            rows.push((m, e, misclassification_prob(m, e, sigma_m, sigma_eta)));
        }
    }
    rows
}

pub(crate) fn linspace(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|k| k as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Sample standard deviation of the last `window` values.
pub fn tail_std(series: &[f64], window: usize) -> f64 {
    let tail = &series[series.len().saturating_sub(window)..];
    if tail.len() < 2 {
        return 0.0;
    }
    let n = tail.len() as f64;
    let mean = tail.iter().sum::<f64>() / n;
    (tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, 0.5)
}

/// How terminal contract holdings are valued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    /// Each contract is worth the terminal outcome probability.
    #[default]
    MarkToOutcome,
    /// The event is drawn once with the terminal probability; contracts pay
    /// 1 or 0.
    Bernoulli { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfitSummary {
    /// Contract payout used for terminal holdings.
    pub payout: f64,
    pub total_capital: f64,
    /// Terminal wealth minus initial budget, per agent.
    pub returns: Vec<f64>,
    pub is_whale: Vec<bool>,
    pub median_normalized_return: f64,
    pub whale_normalized_return: Option<f64>,
}

impl ProfitSummary {
    pub fn normalized(&self) -> Vec<f64> {
        self.returns
            .iter()
            .map(|r| r / self.total_capital)
            .collect()
    }
}

pub fn agent_returns(traj: &Trajectory, resolution: Resolution) -> ProfitSummary {
    let eta = traj.final_eta();
    let payout = match resolution {
        Resolution::MarkToOutcome => eta,
        Resolution::Bernoulli { seed } => {
            let mut rng = stream(seed, traj.run_index, Stream::Resolution);
            if rng.random::<f64>() < eta {
                1.0
            } else {
                0.0
            }
        }
    };
    let returns: Vec<f64> = traj
        .final_agents
        .iter()
        .map(|a| a.state.budget + a.state.holdings * payout - a.initial_budget)
        .collect();
    let is_whale: Vec<bool> = traj.final_agents.iter().map(|a| a.is_whale()).collect();
    let capital = traj.total_capital;
    let ordinary: Vec<f64> = returns
        .iter()
        .zip(&is_whale)
        .filter(|(_, &w)| !w)
        .map(|(r, _)| r / capital)
        .collect();
    let whale = returns
        .iter()
        .zip(&is_whale)
        .find(|(_, &w)| w)
        .map(|(r, _)| r / capital);
    ProfitSummary {
        payout,
        total_capital: capital,
        median_normalized_return: median(&ordinary),
        whale_normalized_return: whale,
        returns,
        is_whale,
    }
}

/// Net cash flow from trading, ignoring terminal contract value.
pub fn trading_cash_flows(traj: &Trajectory) -> Vec<f64> {
    traj.final_agents
        .iter()
        .map(|a| a.state.budget - a.initial_budget)
        .collect()
}

pub fn abs_error_series(traj: &Trajectory) -> Vec<f64> {
    traj.steps.iter().map(|s| (s.price - s.eta).abs()).collect()
}

/// Picks values at 1-based times; times past the end are skipped.
pub fn snapshots_at(series: &[f64], times: &[usize]) -> Vec<(usize, f64)> {
    times
        .iter()
        .filter(|&&t| t >= 1 && t <= series.len())
        .map(|&t| (t, series[t - 1]))
        .collect()
}
