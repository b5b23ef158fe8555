//! Posted-price mechanism for the one-way setting.
//!
//! Passengers only see prices and reply with their best response. The
//! government adapts each OD price by online gradient descent on the social
//! cost and may publish a Laplace-perturbed copy to protect individual
//! responses.

mod ogd;
mod optimum;
mod response;
mod run;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use ogd::ogd_update;
pub(crate) use response::feedback_for;
pub use optimum::{fixed_price_opt, regret, social_cost, FixedPriceOpt, RegretReport};
pub use response::{
    aggregate_response, best_response, response_slope, step_cost, Feedback, ResponseRecord,
    StepResponse,
};
pub use run::{dp_price, gradient_jump, price_sensitivity, run_one_way, OneWayRun, PerturbedPrice, StepRow};

/// Which price update rule to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    /// Lower the price by the participants' summed marginal cost.
    Verbatim,
    /// Step along the social-cost subgradient, deficit penalty included.
    #[default]
    Subgradient,
}

impl std::str::FromStr for UpdateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "verbatim" => Ok(UpdateMode::Verbatim),
            "subgradient" => Ok(UpdateMode::Subgradient),
            other => Err(Error::InvalidParameter(format!("unknown update mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EtaSchedule {
    /// `η_t = c / √t`
    #[default]
    InvSqrt,
    /// `η_t = c`
    Constant,
}

/// Learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eta {
    pub schedule: EtaSchedule,
    pub c: f64,
}

impl Default for Eta {
    fn default() -> Self {
        Eta {
            schedule: EtaSchedule::InvSqrt,
            c: 1.0,
        }
    }
}

impl Eta {
    pub fn constant(c: f64) -> Self {
        Eta {
            schedule: EtaSchedule::Constant,
            c,
        }
    }

    /// Rate at 1-based step `t`.
    pub fn at(&self, t: usize) -> f64 {
        match self.schedule {
            EtaSchedule::InvSqrt => self.c / (t.max(1) as f64).sqrt(),
            EtaSchedule::Constant => self.c,
        }
    }

    pub fn rates(&self, horizon: usize) -> Vec<f64> {
        (1..=horizon).map(|t| self.at(t)).collect()
    }
}

/// One-way run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PricingConfig {
    pub mode: UpdateMode,
    #[serde(serialize_with = "ser_switch", deserialize_with = "de_switch")]
    pub dp: bool,
    pub epsilon: f64,
    pub p_init: f64,
    pub p_cap: f64,
    pub eta: Eta,
    pub seeds: Vec<u64>,
    /// Lower bound on the price sensitivity.
    pub delta_p_min: f64,
    /// Grid step of the fixed-price search.
    pub grid_step: f64,
}

impl Default for PricingConfig {
    fn default() -> Self {
        PricingConfig {
            mode: UpdateMode::Subgradient,
            dp: true,
            epsilon: 1.0,
            p_init: 0.02,
            p_cap: 50.0,
            eta: Eta::default(),
            seeds: vec![0],
            delta_p_min: 1e-6,
            grid_step: 1e-3,
        }
    }
}

impl PricingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.dp && !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.p_cap > 0.0 && self.p_cap.is_finite()) {
            return bad(format!("price cap must be positive, got {}", self.p_cap));
        }
        if !(0.0..=self.p_cap).contains(&self.p_init) {
            return bad(format!("initial price {} outside [0, {}]", self.p_init, self.p_cap));
        }
        if !(self.eta.c > 0.0 && self.eta.c.is_finite()) {
            return bad(format!("learning rate scale must be positive, got {}", self.eta.c));
        }
        if !(self.delta_p_min > 0.0) {
            return bad(format!("sensitivity floor must be positive, got {}", self.delta_p_min));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= self.p_cap) {
            return bad(format!("grid step {} out of range", self.grid_step));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        Ok(())
    }

    /// Privacy budget `(T - Σ_{t<T} η_t) ε` as computed, possibly negative.
    pub fn privacy_budget(&self, horizon: usize) -> f64 {
        if horizon == 0 {
            return 0.0;
        }
        let spent: f64 = (1..horizon).map(|t| self.eta.at(t)).sum();
        (horizon as f64 - spent) * self.epsilon
    }
}

fn ser_switch<S: Serializer>(v: &bool, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(if *v { "on" } else { "off" })
}

fn de_switch<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Switch {
        Flag(bool),
        Word(String),
    }
    match Switch::deserialize(d)? {
        Switch::Flag(b) => Ok(b),
        Switch::Word(w) => match w.as_str() {
            "on" => Ok(true),
            "off" => Ok(false),
            other => Err(serde::de::Error::custom(format!("expected on or off, got {other:?}"))),
        },
    }
}

/// Posted prices `p[s][t]` with the learning rates that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSchedule {
    prices: Vec<Vec<f64>>,
    etas: Vec<f64>,
    p_cap: f64,
}

impl PriceSchedule {
    pub fn new(prices: Vec<Vec<f64>>, etas: Vec<f64>, p_cap: f64) -> Result<Self> {
        let horizon = prices.first().map_or(0, Vec::len);
        if prices.iter().any(|row| row.len() != horizon) || etas.len() != horizon {
            return Err(Error::ShapeMismatch(format!(
                "price rows and {} learning rates must all have length {horizon}",
                etas.len()
            )));
        }
        if let Some(p) = prices.iter().flatten().find(|p| !(0.0..=p_cap).contains(*p)) {
            return Err(Error::InvalidParameter(format!("price {p} outside [0, {p_cap}]")));
        }
        if etas.iter().any(|e| !(*e > 0.0)) || etas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter(
                "learning rates must be positive and nonincreasing".into(),
            ));
        }
        Ok(PriceSchedule {
            prices,
            etas,
            p_cap,
        })
    }

    /// Same price at every step for each OD pair.
    pub fn fixed(per_od: &[f64], etas: Vec<f64>, p_cap: f64) -> Result<Self> {
        let prices = per_od.iter().map(|&p| vec![p; etas.len()]).collect();
        PriceSchedule::new(prices, etas, p_cap)
    }

    pub fn price(&self, s: usize, t: usize) -> f64 {
        self.prices[s][t]
    }

    pub fn prices(&self) -> &[Vec<f64>] {
        &self.prices
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn p_cap(&self) -> f64 {
        self.p_cap
    }

    pub fn num_od(&self) -> usize {
        self.prices.len()
    }

    pub fn horizon(&self) -> usize {
        self.etas.len()
    }
}
