use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::error::{Error, Result};

/// A passenger's offer for one OD pair at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub q: f64,
    pub claimed_cost: f64,
}

impl Bid {
    pub fn new(q: f64, claimed_cost: f64) -> Self {
        Bid { q, claimed_cost }
    }

    /// Contribution of this bid to social welfare when selected.
    pub fn welfare(&self) -> f64 {
        self.q - self.claimed_cost
    }
}

/// One row of the bid-profile JSON file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidRecord {
    pub i: usize,
    pub s: usize,
    pub t: usize,
    pub q: f64,
    pub claimed_cost: f64,
}

/// Bids indexed by (passenger, OD pair, time). Missing entries mean the
/// passenger does not bid for that OD pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BidProfile {
    passengers: usize,
    ods: usize,
    horizon: usize,
    bids: BTreeMap<(usize, usize, usize), Bid>,
}

impl BidProfile {
    pub fn new(passengers: usize, ods: usize, horizon: usize) -> Self {
        BidProfile {
            passengers,
            ods,
            horizon,
            bids: BTreeMap::new(),
        }
    }

    /// Empty profile sized for `sc`.
    pub fn for_scenario(sc: &Scenario) -> Self {
        Self::new(sc.num_passengers(), sc.num_od(), sc.horizon())
    }

    /// Every passenger bids its full capacity at its local OD pair, claiming
    /// its true cost.
    pub fn truthful(sc: &Scenario) -> Result<Self> {
        let mut b = Self::for_scenario(sc);
        for (i, p) in sc.population().iter().enumerate() {
            for t in 0..sc.horizon() {
                if let Some(s) = p.local_at(t) {
                    let q = p.capacity;
                    b.insert(i, s, t, Bid::new(q, p.cost.eval(q)?))?;
                }
            }
        }
        Ok(b)
    }

    pub fn insert(&mut self, i: usize, s: usize, t: usize, bid: Bid) -> Result<()> {
        if i >= self.passengers || s >= self.ods || t >= self.horizon {
            return Err(Error::ShapeMismatch(format!(
                "bid ({i}, {s}, {t}) outside {}x{}x{}",
                self.passengers, self.ods, self.horizon
            )));
        }
        if bid.q < 0.0 || !bid.q.is_finite() || !bid.claimed_cost.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bid ({i}, {s}, {t}) has q = {}, claimed cost = {}",
                bid.q, bid.claimed_cost
            )));
        }
        self.bids.insert((i, s, t), bid);
        Ok(())
    }

    pub fn get(&self, i: usize, s: usize, t: usize) -> Option<&Bid> {
        self.bids.get(&(i, s, t))
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.passengers, self.ods, self.horizon)
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize, usize), &Bid)> {
        self.bids.iter().map(|(k, v)| (*k, v))
    }

    /// Bids of passenger `i` at time `t`, as (OD pair, bid).
    pub fn passenger_bids(&self, i: usize, t: usize) -> Vec<(usize, Bid)> {
        (0..self.ods)
            .filter_map(|s| self.get(i, s, t).map(|b| (s, *b)))
            .collect()
    }

    pub fn has_bids(&self, i: usize) -> bool {
        self.bids.keys().any(|&(j, _, _)| j == i)
    }

    /// The same profile with every bid of passenger `i` removed.
    pub fn without_passenger(&self, i: usize) -> Self {
        BidProfile {
            bids: self
                .bids
                .iter()
                .filter(|((j, _, _), _)| *j != i)
                .map(|(k, v)| (*k, *v))
                .collect(),
            ..*self
        }
    }

    /// Keeps only bids with nonnegative offload, claimed cost and welfare.
    pub fn filter_nonnegative_welfare(&self) -> Self {
        BidProfile {
            bids: self
                .bids
                .iter()
                .filter(|(_, b)| b.q >= 0.0 && b.claimed_cost >= 0.0 && b.welfare() >= 0.0)
                .map(|(k, v)| (*k, *v))
                .collect(),
            ..*self
        }
    }

    pub fn from_records(
        records: &[BidRecord],
        passengers: usize,
        ods: usize,
        horizon: usize,
    ) -> Result<Self> {
        let mut b = Self::new(passengers, ods, horizon);
        for r in records {
            b.insert(r.i, r.s, r.t, Bid::new(r.q, r.claimed_cost))?;
        }
        Ok(b)
    }

    pub fn to_records(&self) -> Vec<BidRecord> {
        self.bids
            .iter()
            .map(|(&(i, s, t), b)| BidRecord {
                i,
                s,
                t,
                q: b.q,
                claimed_cost: b.claimed_cost,
            })
            .collect()
    }

    pub fn from_json(text: &str, sc: &Scenario) -> Result<Self> {
        let records: Vec<BidRecord> = serde_json::from_str(text)?;
        Self::from_records(&records, sc.num_passengers(), sc.num_od(), sc.horizon())
    }
}

/// Binary selection tensor `x[i][s][t]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SelectionProfile {
    passengers: usize,
    ods: usize,
    horizon: usize,
    x: Vec<bool>,
}

impl SelectionProfile {
    pub fn empty(passengers: usize, ods: usize, horizon: usize) -> Self {
        SelectionProfile {
            passengers,
            ods,
            horizon,
            x: vec![false; passengers * ods * horizon],
        }
    }

    pub fn empty_like(b: &BidProfile) -> Self {
        let (n, s, t) = b.dims();
        Self::empty(n, s, t)
    }

    /// Profile at time `t` built from a per-passenger OD assignment.
    pub fn from_assignment(
        passengers: usize,
        ods: usize,
        horizon: usize,
        t: usize,
        assignment: &[Option<usize>],
    ) -> Self {
        let mut x = Self::empty(passengers, ods, horizon);
        for (i, a) in assignment.iter().enumerate() {
            if let Some(s) = *a {
                x.set(i, s, t, true);
            }
        }
        x
    }

    fn idx(&self, i: usize, s: usize, t: usize) -> usize {
        assert!(i < self.passengers && s < self.ods && t < self.horizon);
        (i * self.ods + s) * self.horizon + t
    }

    pub fn get(&self, i: usize, s: usize, t: usize) -> bool {
        self.x[self.idx(i, s, t)]
    }

    pub fn set(&mut self, i: usize, s: usize, t: usize, v: bool) {
        let k = self.idx(i, s, t);
        self.x[k] = v;
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.passengers, self.ods, self.horizon)
    }

    /// Selected entries in (i, s, t) order.
    pub fn selected(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let (ods, horizon) = (self.ods, self.horizon);
        self.x.iter().enumerate().filter(|(_, v)| **v).map(move |(k, _)| {
            let t = k % horizon;
            let s = (k / horizon) % ods;
            let i = k / (horizon * ods);
            (i, s, t)
        })
    }

    pub fn count(&self) -> usize {
        self.x.iter().filter(|v| **v).count()
    }
}

fn check_shapes(x: &SelectionProfile, b: &BidProfile, sc: &Scenario) -> Result<()> {
    let want = (sc.num_passengers(), sc.num_od(), sc.horizon());
    if x.dims() != want || b.dims() != want {
        return Err(Error::ShapeMismatch(format!(
            "selection {:?} and bids {:?} must both match scenario {want:?}",
            x.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Social welfare `Σ x (q − C̄(q))` over every selected entry.
pub fn social_welfare(x: &SelectionProfile, b: &BidProfile, sc: &Scenario) -> Result<f64> {
    check_shapes(x, b, sc)?;
    let mut total = 0.0;
    for (i, s, t) in x.selected() {
        let bid = b.get(i, s, t).ok_or_else(|| {
            Error::ShapeMismatch(format!("entry ({i}, {s}, {t}) is selected but has no bid"))
        })?;
        total += bid.welfare();
    }
    Ok(total)
}

/// Checks the allocation constraints at time `t`: one OD pair per
/// passenger, demand covered, and selections only where a bid exists.
pub fn check_feasible_at(
    x: &SelectionProfile,
    b: &BidProfile,
    sc: &Scenario,
    t: usize,
) -> Result<bool> {
    check_shapes(x, b, sc)?;
    let (n, ods, _) = x.dims();
    let mut covered = vec![0.0; ods];
    for i in 0..n {
        let mut picks = 0;
        for (s, cover) in covered.iter_mut().enumerate() {
            if x.get(i, s, t) {
                picks += 1;
                match b.get(i, s, t) {
                    Some(bid) => *cover += bid.q,
                    None => return Ok(false),
                }
            }
        }
        if picks > 1 {
            return Ok(false);
        }
    }
    Ok(covered
        .iter()
        .enumerate()
        .all(|(s, c)| *c >= sc.demand(s, t)))
}

/// Feasibility over the whole horizon.
pub fn check_feasible(x: &SelectionProfile, b: &BidProfile, sc: &Scenario) -> Result<bool> {
    for t in 0..sc.horizon() {
        if !check_feasible_at(x, b, sc, t)? {
            return Ok(false);
        }
    }
    check_shapes(x, b, sc)?;
    Ok(true)
}
