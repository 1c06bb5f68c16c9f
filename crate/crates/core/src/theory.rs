//! Closed-form results used to cross-check the simulator.
//!
//! The price error `delta_t = m_t - eta` of a market with budget weights
//! `w_i` follows, to first order, the recursion
//! `delta_t = a delta_{t-1} + b delta_{t-2}` with
//! `a = 1 - alpha + S_w` and `b = alpha H_B - (1 - alpha) S_w`, where
//! `S_w = sum w_i (1 - h_i) s_i` and `H_B = sum w_i h_i`.

use std::fmt;

use serde::Serialize;

use crate::agents::Agent;
use crate::analysis::linspace;
use crate::error::{Error, Result};

/// Margin below which a stability condition counts as on the boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Price error left by a whale holding `rho` of the capital with a
/// valuation `delta_valuation` away from the truth.
pub fn steady_state_error(rho: f64, delta_valuation: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&rho));
    rho * delta_valuation
}

/// Variance of the net demand contributed by signal noise at price `m`.
pub fn net_demand_variance(
    budgets: &[f64],
    stubbornness: &[f64],
    expertise: &[f64],
    m: f64,
) -> Result<f64> {
    if budgets.len() != stubbornness.len() {
        return Err(Error::LengthMismatch(budgets.len(), stubbornness.len()));
    }
    if budgets.len() != expertise.len() {
        return Err(Error::LengthMismatch(budgets.len(), expertise.len()));
    }
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::DegeneratePrice(m));
    }
    let scale = m * (1.0 - m);
    Ok(budgets
        .iter()
        .zip(stubbornness)
        .zip(expertise)
        .map(|((b, s), e)| (b / scale).powi(2) * (1.0 - s).powi(2) * (1.0 - e))
        .sum())
}

/// Feedback gain for a given price-impact scale around a typical price.
pub fn calibrate_alpha(lambda: f64, mean_price: f64, scale: f64) -> f64 {
    scale * lambda * mean_price * (1.0 - mean_price)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryInputs {
    pub alpha: f64,
    pub weights: Vec<f64>,
    pub herding: Vec<f64>,
    pub stubbornness: Vec<f64>,
}

impl TheoryInputs {
    pub fn new(
        alpha: f64,
        weights: Vec<f64>,
        herding: Vec<f64>,
        stubbornness: Vec<f64>,
    ) -> Result<Self> {
        let inputs = TheoryInputs {
            alpha,
            weights,
            herding,
            stubbornness,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    /// Budget-weighted inputs for the ordinary bettors of a population. A
    /// whale's fixed valuation acts as a constant forcing term, so it is left
    /// out of the recursion.
    pub fn from_agents(alpha: f64, agents: &[Agent]) -> Result<Self> {
        let ordinary: Vec<&Agent> = agents.iter().filter(|a| !a.is_whale()).collect();
        let total: f64 = ordinary.iter().map(|a| a.state.budget).sum();
        if total <= 0.0 {
            return Err(Error::config("weights", "population holds no capital"));
        }
        Self::new(
            alpha,
            ordinary.iter().map(|a| a.state.budget / total).collect(),
            ordinary.iter().map(|a| a.traits.herding).collect(),
            ordinary.iter().map(|a| a.traits.stubbornness).collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(
                "alpha",
                format!("must be finite and >= 0, got {}", self.alpha),
            ));
        }
        let n = self.weights.len();
        if self.herding.len() != n {
            return Err(Error::LengthMismatch(n, self.herding.len()));
        }
        if self.stubbornness.len() != n {
            return Err(Error::LengthMismatch(n, self.stubbornness.len()));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::config("weights", "must be non-negative"));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "weights",
                format!("must sum to 1, got {sum}"),
            ));
        }
        let unit = |v: &f64| (0.0..=1.0).contains(v);
        if !self.herding.iter().all(unit) {
            return Err(Error::config("herding", "values must lie in [0, 1]"));
        }
        if !self.stubbornness.iter().all(unit) {
            return Err(Error::config("stubbornness", "values must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn s_w(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.herding)
            .zip(&self.stubbornness)
            .map(|((w, h), s)| w * (1.0 - h) * s)
            .sum()
    }

    pub fn h_bar(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.herding)
            .map(|(w, h)| w * h)
            .sum()
    }
}

/// A characteristic root, possibly complex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub re: f64,
    pub im: f64,
}

impl Root {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ar2Coefficients {
    pub a: f64,
    pub b: f64,
    pub roots: [Root; 2],
}

impl Ar2Coefficients {
    pub fn new(a: f64, b: f64) -> Self {
        let disc = a * a + 4.0 * b;
        let roots = if disc >= 0.0 {
            let sq = disc.sqrt();
            // The larger-magnitude root first, the other via Vieta to avoid
            // cancellation.
            let big = 0.5 * (a + sq.copysign(a));
            let small = if big != 0.0 { -b / big } else { 0.0 };
            [Root { re: big, im: 0.0 }, Root { re: small, im: 0.0 }]
        } else {
            let im = 0.5 * (-disc).sqrt();
            [
                Root { re: 0.5 * a, im },
                Root {
                    re: 0.5 * a,
                    im: -im,
                },
            ]
        };
        Ar2Coefficients { a, b, roots }
    }

    pub fn from_aggregates(alpha: f64, s_w: f64, h_bar: f64) -> Self {
        Self::new(1.0 - alpha + s_w, alpha * h_bar - (1.0 - alpha) * s_w)
    }

    pub fn spectral_radius(&self) -> f64 {
        self.roots[0].modulus().max(self.roots[1].modulus())
    }
}

pub fn ar2_coefficients(inputs: &TheoryInputs) -> Ar2Coefficients {
    Ar2Coefficients::from_aggregates(inputs.alpha, inputs.s_w(), inputs.h_bar())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Marginal,
    Unstable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Marginal => "marginal",
            Verdict::Unstable => "unstable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Margins of `1 - a - b`, `1 + a - b` and `1 + b`.
    pub margins: [f64; 3],
    pub conditions: [bool; 3],
    pub verdict: Verdict,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.verdict == Verdict::Stable
    }

    /// Distance of the closest condition from its boundary.
    pub fn boundary_gap(&self) -> f64 {
        self.margins
            .iter()
            .fold(f64::INFINITY, |acc, m| acc.min(m.abs()))
    }
}

/// Checks the three triangle conditions for both roots to lie strictly
/// inside the unit circle.
pub fn ar2_stable(coeffs: &Ar2Coefficients) -> StabilityReport {
    let (a, b) = (coeffs.a, coeffs.b);
    let margins = [1.0 - a - b, 1.0 + a - b, 1.0 + b];
    let conditions = margins.map(|m| m > BOUNDARY_TOLERANCE);
    let verdict = if conditions.iter().all(|&c| c) {
        Verdict::Stable
    } else if margins.iter().all(|&m| m >= -BOUNDARY_TOLERANCE) {
        Verdict::Marginal
    } else {
        Verdict::Unstable
    };
    StabilityReport {
        margins,
        conditions,
        verdict,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionCell {
    pub h_bar: f64,
    pub s_w: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRegion {
    pub alpha: f64,
    pub resolution: usize,
    /// Row-major over `h_bar`, then `s_w`.
    pub cells: Vec<RegionCell>,
}

impl StabilityRegion {
    pub fn stable_fraction(&self) -> f64 {
        let stable = self
            .cells
            .iter()
            .filter(|c| c.verdict == Verdict::Stable)
            .count();
        stable as f64 / self.cells.len().max(1) as f64
    }

    pub fn at(&self, i: usize, j: usize) -> &RegionCell {
        &self.cells[i * self.resolution + j]
    }
}

/// Evaluates stability on a `resolution x resolution` grid over
/// `(H_B, S_w)` in `[0, 1]^2`.
pub fn stability_region(alpha: f64, resolution: usize) -> Result<StabilityRegion> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::config(
            "alpha",
            format!("must be finite and >= 0, got {alpha}"),
        ));
    }
    if resolution < 2 {
        return Err(Error::config("resolution", "need at least 2 grid points"));
    }
    let axis = linspace(resolution);
    let mut cells = Vec::with_capacity(resolution * resolution);
    for &h_bar in &axis {
        for &s_w in &axis {
            let verdict = ar2_stable(&Ar2Coefficients::from_aggregates(alpha, s_w, h_bar)).verdict;
            cells.push(RegionCell {
                h_bar,
                s_w,
                verdict,
            });
        }
    }
    Ok(StabilityRegion {
        alpha,
        resolution,
        cells,
    })
}

/// Expected budget-weighted valuation error one step ahead.
pub fn expected_valuation_error_step(
    weights: &[f64],
    herding: &[f64],
    stubbornness: &[f64],
    valuation_errors: &[f64],
    delta: f64,
) -> Result<f64> {
    let n = weights.len();
    for len in [herding.len(), stubbornness.len(), valuation_errors.len()] {
        if len != n {
            return Err(Error::LengthMismatch(n, len));
        }
    }
    Ok((0..n)
        .map(|i| {
            weights[i]
                * ((1.0 - herding[i]) * stubbornness[i] * valuation_errors[i] + herding[i] * delta)
        })
        .sum())
}
