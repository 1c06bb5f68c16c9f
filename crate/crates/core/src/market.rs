//! Order collection, randomised matching at a single price, settlement and
//! the net-demand price update.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{optimal_order, Agent};
use crate::error::{Error, Result};

/// Prices are kept at least this far from 0 and 1.
pub const PRICE_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Order {
    /// Index of the submitting agent in the population slice.
    pub agent: usize,
    /// Contracts; positive buys, negative sells.
    pub volume: f64,
}

/// One step's book. Nothing carries over between steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OrderBook {
    orders: Vec<Order>,
    net_demand: f64,
    gross_volume: f64,
}

impl OrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an order. Zero and non-finite volumes are dropped.
    pub fn push(&mut self, agent: usize, volume: f64) {
        if volume == 0.0 || !volume.is_finite() {
            return;
        }
        self.orders.push(Order { agent, volume });
        self.net_demand += volume;
        self.gross_volume += volume.abs();
    }

    pub fn orders(&self) -> &[Order] {
        &self.orders
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    /// `D`: signed sum of submitted volumes.
    pub fn net_demand(&self) -> f64 {
        self.net_demand
    }

    /// `K`: sum of absolute submitted volumes.
    pub fn gross_volume(&self) -> f64 {
        self.gross_volume
    }

    pub fn buy_volume(&self) -> f64 {
        self.orders
            .iter()
            .filter(|o| o.volume > 0.0)
            .map(|o| o.volume)
            .sum()
    }

    pub fn sell_volume(&self) -> f64 {
        self.orders
            .iter()
            .filter(|o| o.volume < 0.0)
            .map(|o| -o.volume)
            .sum()
    }
}

impl FromIterator<Order> for OrderBook {
    fn from_iter<I: IntoIterator<Item = Order>>(iter: I) -> Self {
        let mut book = OrderBook::new();
        for o in iter {
            book.push(o.agent, o.volume);
        }
        book
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fill {
    pub buyer: usize,
    pub seller: usize,
    pub quantity: f64,
    pub price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub price: f64,
    /// Largest possible single-step price move.
    pub lambda: f64,
}

impl MarketState {
    pub fn new(price: f64, lambda: f64) -> Result<Self> {
        if !(price > 0.0 && price < 1.0) {
            return Err(Error::config(
                "initial_price",
                format!("{price} is not in (0, 1)"),
            ));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::config(
                "lambda",
                format!("{lambda} must be positive"),
            ));
        }
        Ok(MarketState { price, lambda })
    }
}

/// Asks every agent for its utility-maximising order at the posted price.
/// `max_volume` optionally caps the absolute size of each order.
pub fn collect_orders(
    agents: &[Agent],
    market: &MarketState,
    max_volume: Option<f64>,
) -> OrderBook {
    let mut book = OrderBook::new();
    for (idx, agent) in agents.iter().enumerate() {
        let s = &agent.state;
        let mut x = optimal_order(
            s.budget,
            s.holdings,
            s.valuation,
            market.price,
            agent.traits.risk_aversion,
        );
        if let Some(cap) = max_volume {
            x = x.clamp(-cap, cap);
        }
        book.push(idx, x);
    }
    book
}

/// Shuffles the book and walks it, matching each arriving order against the
/// queue of resting interest on the other side. Partial fills leave the
/// remainder at the front of its queue. Whatever is left at the end expires.
pub fn match_orders<R: Rng + ?Sized>(book: &OrderBook, price: f64, rng: &mut R) -> Vec<Fill> {
    let mut arrivals = book.orders().to_vec();
    arrivals.shuffle(rng);

    let mut resting_buys: VecDeque<(usize, f64)> = VecDeque::new();
    let mut resting_sells: VecDeque<(usize, f64)> = VecDeque::new();
    let mut fills = Vec::new();

    for order in arrivals {
        let is_buy = order.volume > 0.0;
        let mut remaining = order.volume.abs();
        let opposite = if is_buy {
            &mut resting_sells
        } else {
            &mut resting_buys
        };
        while remaining > 0.0 {
            let Some(front) = opposite.front_mut() else {
                break;
            };
            let quantity = remaining.min(front.1);
            let (buyer, seller) = if is_buy {
                (order.agent, front.0)
            } else {
                (front.0, order.agent)
            };
            fills.push(Fill {
                buyer,
                seller,
                quantity,
                price,
            });
            remaining -= quantity;
            front.1 -= quantity;
            if front.1 <= 0.0 {
                opposite.pop_front();
            }
        }
        if remaining > 0.0 {
            let own = if is_buy {
                &mut resting_buys
            } else {
                &mut resting_sells
            };
            own.push_back((order.agent, remaining));
        }
    }
    fills
}

/// Transfers cash and contracts for each fill.
pub fn settle_fills(agents: &mut [Agent], fills: &[Fill], price: f64) -> Result<()> {
    for fill in fills {
        let cost = fill.quantity * price;
        {
            let buyer = &mut agents[fill.buyer].state;
            buyer.budget -= cost;
            buyer.holdings += fill.quantity;
        }
        {
            let seller = &mut agents[fill.seller].state;
            seller.budget += cost;
            seller.holdings -= fill.quantity;
        }
        let cash = agents[fill.buyer].state.budget;
        if cash < 0.0 {
            return Err(Error::NegativeCash {
                agent: agents[fill.buyer].id,
                cash,
            });
        }
    }
    Ok(())
}

/// `m' = clip(m + lambda D / K)`. An empty book leaves the price unchanged.
pub fn update_price(market: &MarketState, net_demand: f64, gross_volume: f64) -> MarketState {
    if gross_volume <= 0.0 {
        return *market;
    }
    let step = market.lambda * net_demand / gross_volume;
    MarketState {
        price: (market.price + step).clamp(PRICE_MARGIN, 1.0 - PRICE_MARGIN),
        lambda: market.lambda,
    }
}
