//! Two-way mechanisms: passengers bid, the government selects winners and
//! pays them.
//!
//! [`ExactMechanism`] samples a whole selection profile from the
//! exponential mechanism over the enumerated feasible set and pays with an
//! entropy-regularized rule. [`run_two_way`] is the polynomial-time
//! alternative that decomposes the problem by OD pair and draws winners one
//! at a time.

mod efficient;
mod exact;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SelectionProfile;

pub use efficient::{
    decomposed_select, efficient_payment, first_pick_probabilities, run_two_way,
    run_two_way_with, select_from_pool, DecomposedDraw, SelectionGuard,
};
pub use exact::{
    enumerate_feasible, exact_payment, Assignment, exact_select, sensitivity_delta, DeltaMode,
    ExactConfig, ExactDistribution, ExactMechanism, DEFAULT_PROFILE_CAP,
};

/// Privacy parameters of the auction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuctionParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl AuctionParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(AuctionParams { epsilon, delta })
    }

    /// Per-draw scale of the decomposed auction, `ε / (e · ln(e/δ))`.
    pub fn eps_prime(&self) -> f64 {
        let e = std::f64::consts::E;
        self.epsilon / (e * (e / self.delta).ln())
    }
}

/// Shortfall of selected offload against demand at one (OD, time) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deficit {
    pub s: usize,
    pub t: usize,
    pub shortfall: f64,
}

/// Result of running a two-way mechanism over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionOutcome {
    pub selection: SelectionProfile,
    /// Realized payments keyed by (passenger, OD, time); present only for
    /// selected entries. Negative values are kept as computed.
    pub payments: BTreeMap<(usize, usize, usize), f64>,
    pub welfare: f64,
    /// `welfare_by_od[s][t]`
    pub welfare_by_od: Vec<Vec<f64>>,
    /// `winners[t][s]`, in draw order.
    pub winners: Vec<Vec<Vec<usize>>>,
    pub deficits: Vec<Deficit>,
    /// Number of winners paid less than their claimed cost.
    pub ir_violations: usize,
}

impl AuctionOutcome {
    /// Total offload selected at (s, t).
    pub fn offload(&self, bids: &crate::model::BidProfile, s: usize, t: usize) -> f64 {
        self.winners[t][s]
            .iter()
            .filter_map(|&i| bids.get(i, s, t))
            .map(|b| b.q)
            .sum()
    }
}


#[cfg(test)]
mod tests_exact;
#[cfg(test)]
mod tests_efficient;
