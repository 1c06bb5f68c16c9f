//! CRRA utility and expected-utility-maximising order sizes.
//!
//! An agent holding cash `B` and `C` contracts who buys `x` contracts at price
//! `m` ends with `B - m x` in the state where the event fails and
//! `B - m x + C + x` in the state where it occurs. The expected utility
//! weights those two states by the agent's valuation `V`.

use crate::error::{Error, Result, WealthBranch};

/// Smallest post-trade wealth an order may leave in either state.
pub const FEASIBILITY_FLOOR: f64 = 1e-6;

const ROOT_TOLERANCE: f64 = 1e-9;
const MAX_BISECTIONS: usize = 200;

pub fn crra_utility(wealth: f64, risk_aversion: f64) -> Result<f64> {
    if !(wealth > 0.0) {
        return Err(Error::NonPositiveWealth(wealth));
    }
    Ok(if risk_aversion == 1.0 {
        wealth.ln()
    } else {
        wealth.powf(1.0 - risk_aversion) / (1.0 - risk_aversion)
    })
}

/// `u'(w) = w^-r`. Arguments below the feasibility floor are lifted to it.
pub fn marginal_utility(wealth: f64, risk_aversion: f64) -> f64 {
    let w = wealth.max(FEASIBILITY_FLOOR);
    if risk_aversion == 0.0 {
        1.0
    } else if risk_aversion == 1.0 {
        1.0 / w
    } else {
        w.powf(-risk_aversion)
    }
}

pub fn expected_utility(
    volume: f64,
    budget: f64,
    holdings: f64,
    valuation: f64,
    price: f64,
    risk_aversion: f64,
) -> Result<f64> {
    let lose = budget - price * volume;
    let win = lose + holdings + volume;
    if !(win > 0.0) {
        return Err(Error::InfeasibleOrder {
            branch: WealthBranch::Win,
            wealth: win,
        });
    }
    if !(lose > 0.0) {
        return Err(Error::InfeasibleOrder {
            branch: WealthBranch::Lose,
            wealth: lose,
        });
    }
    Ok(valuation * crra_utility(win, risk_aversion)?
        + (1.0 - valuation) * crra_utility(lose, risk_aversion)?)
}

/// Range of order volumes that keep post-trade cash and post-trade total
/// wealth at or above [`FEASIBILITY_FLOOR`]. Always contains zero.
pub fn feasible_order_bounds(budget: f64, holdings: f64, price: f64) -> (f64, f64) {
    let max_buy = (budget - FEASIBILITY_FLOOR) / price;
    let max_sell = (budget + holdings - FEASIBILITY_FLOOR) / (1.0 - price);
    ((-max_sell).min(0.0), max_buy.max(0.0))
}

fn check_price(price: f64) -> Result<()> {
    if price > 0.0 && price < 1.0 {
        Ok(())
    } else {
        Err(Error::DegeneratePrice(price))
    }
}

/// Closed-form maximiser for log utility, clamped into the feasible range.
pub fn optimal_order_log(budget: f64, holdings: f64, valuation: f64, price: f64) -> Result<f64> {
    check_price(price)?;
    let m = price;
    let raw =
        (m * (budget + holdings - holdings * valuation) - budget * valuation) / (m * (m - 1.0));
    let (lo, hi) = feasible_order_bounds(budget, holdings, price);
    Ok(raw.clamp(lo, hi))
}

/// Derivative of the expected utility with respect to the order volume.
/// It is strictly decreasing in `x` whenever `r > 0`.
fn utility_slope(x: f64, budget: f64, holdings: f64, valuation: f64, price: f64, r: f64) -> f64 {
    let lose = budget - price * x;
    let win = lose + holdings + x;
    valuation * (1.0 - price) * marginal_utility(win, r)
        - (1.0 - valuation) * price * marginal_utility(lose, r)
}

/// Maximises the expected utility over the feasible range.
///
/// The first-order condition is solved by bisection. When the slope has the
/// same sign across the whole range the optimum sits on the corresponding
/// bound, and a slope that vanishes identically (risk-neutral agent at a fair
/// price) yields no trade. Degenerate inputs produce zero.
pub fn optimal_order(
    budget: f64,
    holdings: f64,
    valuation: f64,
    price: f64,
    risk_aversion: f64,
) -> f64 {
    if check_price(price).is_err()
        || !budget.is_finite()
        || !holdings.is_finite()
        || !(0.0..=1.0).contains(&valuation)
    {
        return 0.0;
    }
    let (mut lo, mut hi) = feasible_order_bounds(budget, holdings, price);
    if lo == hi {
        return lo;
    }
    let slope = |x: f64| utility_slope(x, budget, holdings, valuation, price, risk_aversion);

    if slope(0.0) == 0.0 {
        return 0.0;
    }
    let slope_lo = slope(lo);
    let slope_hi = slope(hi);
    if slope_lo <= 0.0 && slope_hi >= 0.0 {
        return 0.0;
    }
    if slope_lo <= 0.0 {
        return lo;
    }
    if slope_hi >= 0.0 {
        return hi;
    }

    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= ROOT_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First-order approximation of the log-utility order around `V = m`,
/// ignoring holdings. Not clamped.
pub fn linearized_order(budget: f64, valuation: f64, price: f64) -> Result<f64> {
    check_price(price)?;
    Ok(budget * (valuation - price) / (price * (1.0 - price)))
}
