use std::collections::BTreeMap;

use rand::Rng;

use super::{AuctionOutcome, AuctionParams};
use crate::error::{Error, Result};
use crate::model::{BidProfile, Scenario, SelectionProfile};
use crate::numeric::{entropy, sample_index, soft_max, softmax};

/// Default limit on the number of feasible profiles the exact mechanism
/// will enumerate at one time step.
pub const DEFAULT_PROFILE_CAP: usize = 1_000_000;

/// Limit on stored assignment entries (profiles × passengers), so that wide
/// populations fail fast instead of exhausting memory.
const MAX_ASSIGNMENT_CELLS: usize = 50_000_000;

/// How the welfare range `Δ` that scales the exponential mechanism is
/// obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaMode {
    /// `max Ω − min Ω` over the enumerated feasible set.
    #[default]
    Enumerated,
    /// `Σ_i max_s max(0, q − C̄)`, an upper bound on welfare minus the
    /// lower bound 0. Requires no enumeration.
    WelfareBound,
    /// `Σ_i max_s q`. Does not depend on any claimed cost, so a passenger
    /// cannot move `Δ` by misreporting its cost.
    OffloadBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactConfig {
    pub delta_mode: DeltaMode,
    pub cap: usize,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            delta_mode: DeltaMode::Enumerated,
            cap: DEFAULT_PROFILE_CAP,
        }
    }
}

/// Per-passenger OD assignment at one time step; `None` means unselected.
pub type Assignment = Vec<Option<usize>>;

/// Enumerates assignments satisfying the allocation constraints at `t`.
fn feasible_assignments(
    bids: &BidProfile,
    sc: &Scenario,
    t: usize,
    cap: usize,
) -> Result<Vec<Assignment>> {
    let (n, ods, _) = bids.dims();
    let options: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            bids.passenger_bids(i, t)
                .into_iter()
                .map(|(s, b)| (s, b.q))
                .collect()
        })
        .collect();
    // suffix[i][s]: most offload passengers i.. could still add to OD s
    let mut suffix = vec![vec![0.0; ods]; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1].clone();
        for &(s, q) in &options[i] {
            suffix[i][s] += q;
        }
    }
    let demand: Vec<f64> = (0..ods).map(|s| sc.demand(s, t)).collect();
    let cap = cap.min(MAX_ASSIGNMENT_CELLS / n.max(1));

    struct Search<'a> {
        options: &'a [Vec<(usize, f64)>],
        suffix: &'a [Vec<f64>],
        demand: &'a [f64],
        covered: Vec<f64>,
        current: Assignment,
        out: Vec<Assignment>,
        cap: usize,
    }

    impl Search<'_> {
        fn go(&mut self, i: usize) -> Result<()> {
            let reachable = self
                .covered
                .iter()
                .zip(&self.suffix[i])
                .zip(self.demand)
                .all(|((c, rest), d)| c + rest >= *d);
            if !reachable {
                return Ok(());
            }
            if i == self.options.len() {
                if self.out.len() >= self.cap {
                    return Err(Error::TooLarge { limit: self.cap });
                }
                self.out.push(self.current.clone());
                return Ok(());
            }
            self.current[i] = None;
            self.go(i + 1)?;
            for k in 0..self.options[i].len() {
                let (s, q) = self.options[i][k];
                self.current[i] = Some(s);
                self.covered[s] += q;
                self.go(i + 1)?;
                self.covered[s] -= q;
            }
            self.current[i] = None;
            Ok(())
        }
    }

    let mut search = Search {
        options: &options,
        suffix: &suffix,
        demand: &demand,
        covered: vec![0.0; ods],
        current: vec![None; n],
        out: Vec::new(),
        cap,
    };
    search.go(0)?;
    Ok(search.out)
}

fn assignment_welfare(bids: &BidProfile, t: usize, a: &[Option<usize>]) -> f64 {
    a.iter()
        .enumerate()
        .filter_map(|(i, s)| s.and_then(|s| bids.get(i, s, t)))
        .map(|b| b.welfare())
        .sum()
}

/// The exact mechanism's output distribution at one time step.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    pub assignments: Vec<Assignment>,
    pub welfare: Vec<f64>,
    pub probs: Vec<f64>,
    pub delta: f64,
    /// `2Δ/ε`
    pub temperature: f64,
}

impl ExactDistribution {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn expected_welfare(&self) -> f64 {
        self.probs.iter().zip(&self.welfare).map(|(p, w)| p * w).sum()
    }

    pub fn max_welfare(&self) -> f64 {
        self.welfare.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Probability that passenger `i` is selected for any OD pair.
    pub fn selection_probability(&self, i: usize) -> f64 {
        self.assignments
            .iter()
            .zip(&self.probs)
            .filter(|(a, _)| a[i].is_some())
            .map(|(_, p)| p)
            .sum()
    }

    /// Probability of each distinct assignment, keyed by the assignment.
    pub fn as_map(&self) -> BTreeMap<Assignment, f64> {
        self.assignments
            .iter()
            .cloned()
            .zip(self.probs.iter().copied())
            .collect()
    }
}

/// The exponential-mechanism auction with entropy-regularized payments.
#[derive(Debug, Clone, Copy)]
pub struct ExactMechanism<'a> {
    bids: &'a BidProfile,
    scenario: &'a Scenario,
    params: AuctionParams,
    config: ExactConfig,
}

impl<'a> ExactMechanism<'a> {
    pub fn new(bids: &'a BidProfile, scenario: &'a Scenario, params: AuctionParams) -> Self {
        Self::with_config(bids, scenario, params, ExactConfig::default())
    }

    pub fn with_config(
        bids: &'a BidProfile,
        scenario: &'a Scenario,
        params: AuctionParams,
        config: ExactConfig,
    ) -> Self {
        ExactMechanism {
            bids,
            scenario,
            params,
            config,
        }
    }

    pub fn feasible(&self, t: usize) -> Result<Vec<Assignment>> {
        feasible_assignments(self.bids, self.scenario, t, self.config.cap)
    }

    pub fn delta(&self, t: usize) -> Result<f64> {
        match self.config.delta_mode {
            DeltaMode::Enumerated => {
                let set = self.feasible(t)?;
                if set.is_empty() {
                    return Err(Error::Infeasible(format!("no feasible profile at t = {t}")));
                }
                let w: Vec<f64> = set
                    .iter()
                    .map(|a| assignment_welfare(self.bids, t, a))
                    .collect();
                let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
                Ok(hi - lo)
            }
            DeltaMode::WelfareBound => Ok(self.per_passenger_max(t, |b| b.welfare().max(0.0))),
            DeltaMode::OffloadBound => Ok(self.per_passenger_max(t, |b| b.q)),
        }
    }

    fn per_passenger_max(&self, t: usize, f: impl Fn(&crate::model::Bid) -> f64) -> f64 {
        let (n, _, _) = self.bids.dims();
        (0..n)
            .map(|i| {
                self.bids
                    .passenger_bids(i, t)
                    .iter()
                    .map(|(_, b)| f(b))
                    .fold(0.0, f64::max)
            })
            .sum()
    }

    pub fn distribution(&self, t: usize) -> Result<ExactDistribution> {
        let assignments = self.feasible(t)?;
        if assignments.is_empty() {
            return Err(Error::Infeasible(format!("no feasible profile at t = {t}")));
        }
        let welfare: Vec<f64> = assignments
            .iter()
            .map(|a| assignment_welfare(self.bids, t, a))
            .collect();
        let delta = self.delta(t)?;
        let temperature = 2.0 * delta / self.params.epsilon;
        let log_weights: Vec<f64> = if temperature > 0.0 {
            welfare.iter().map(|w| w / temperature).collect()
        } else {
            // zero range: every profile has the same welfare
            vec![0.0; welfare.len()]
        };
        Ok(ExactDistribution {
            probs: softmax(&log_weights),
            assignments,
            welfare,
            delta,
            temperature,
        })
    }

    pub fn select<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Result<SelectionProfile> {
        let dist = self.distribution(t)?;
        Ok(self.sample(&dist, t, rng))
    }

    fn sample<R: Rng + ?Sized>(
        &self,
        dist: &ExactDistribution,
        t: usize,
        rng: &mut R,
    ) -> SelectionProfile {
        let logp: Vec<f64> = dist.probs.iter().map(|p| p.ln()).collect();
        let k = sample_index(&logp, rng.random::<f64>());
        let (n, ods, horizon) = self.bids.dims();
        SelectionProfile::from_assignment(n, ods, horizon, t, &dist.assignments[k])
    }

    /// Expected transfer to passenger `i` at time `t`:
    ///
    /// `E_D[Σ_j x q − Σ_{j≠i} x C̄] + (2Δ/ε)·H(D) − (2Δ/ε)·ln Σ_{X₋ᵢ} exp(ε Ω(X₋ᵢ) / 2Δ)`
    ///
    /// with `H` in nats and `D` the mechanism's distribution on the full
    /// profile.
    pub fn payment(&self, t: usize, i: usize) -> Result<f64> {
        let dist = self.distribution(t)?;
        self.payment_from(&dist, t, i)
    }

    fn payment_from(&self, dist: &ExactDistribution, t: usize, i: usize) -> Result<f64> {
        let (n, _, _) = self.bids.dims();
        if i >= n || self.bids.passenger_bids(i, t).is_empty() {
            return Err(Error::UnknownPassenger(i));
        }
        let mut expectation = 0.0;
        for (a, p) in dist.assignments.iter().zip(&dist.probs) {
            let mut v = 0.0;
            for (j, s) in a.iter().enumerate() {
                if let Some(b) = s.and_then(|s| self.bids.get(j, s, t)) {
                    v += b.q;
                    if j != i {
                        v -= b.claimed_cost;
                    }
                }
            }
            expectation += p * v;
        }
        let tau = dist.temperature;
        let others = self.bids.without_passenger(i);
        let rest = feasible_assignments(&others, self.scenario, t, self.config.cap)?;
        if rest.is_empty() {
            return Err(Error::Infeasible(format!(
                "demand at t = {t} cannot be covered without passenger {i}"
            )));
        }
        let rest_welfare: Vec<f64> = rest
            .iter()
            .map(|a| assignment_welfare(&others, t, a))
            .collect();
        Ok(expectation + tau * entropy(&dist.probs) - soft_max(&rest_welfare, tau))
    }

    /// Expected utility of passenger `i`: expected transfer minus expected
    /// true cost. `true_cost(s, q)` is the passenger's real cost of
    /// providing `q` at OD `s`.
    pub fn expected_utility(
        &self,
        t: usize,
        i: usize,
        true_cost: &dyn Fn(usize, f64) -> f64,
    ) -> Result<f64> {
        let dist = self.distribution(t)?;
        let pay = self.payment_from(&dist, t, i)?;
        let mut cost = 0.0;
        for (a, p) in dist.assignments.iter().zip(&dist.probs) {
            if let Some(s) = a[i] {
                let q = self.bids.get(i, s, t).map_or(0.0, |b| b.q);
                cost += p * true_cost(s, q);
            }
        }
        Ok(pay - cost)
    }

    /// Runs the mechanism at every time step. A selected passenger receives
    /// its expected transfer divided by its selection probability, so the
    /// realized payment matches the expected transfer on average.
    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<AuctionOutcome> {
        let (n, ods, horizon) = self.bids.dims();
        let mut selection = SelectionProfile::empty(n, ods, horizon);
        let mut payments = BTreeMap::new();
        let mut welfare_by_od = vec![vec![0.0; horizon]; ods];
        let mut winners = vec![vec![Vec::new(); ods]; horizon];
        let mut ir_violations = 0;
        for t in 0..horizon {
            let dist = self.distribution(t)?;
            let x = self.sample(&dist, t, rng);
            for (i, s, tt) in x.selected() {
                selection.set(i, s, tt, true);
                let bid = self.bids.get(i, s, t).expect("selected entries carry bids");
                welfare_by_od[s][t] += bid.welfare();
                winners[t][s].push(i);
                let r = self.payment_from(&dist, t, i)? / dist.selection_probability(i);
                if r < bid.claimed_cost {
                    ir_violations += 1;
                }
                payments.insert((i, s, t), r);
            }
        }
        let welfare = welfare_by_od.iter().flatten().sum();
        Ok(AuctionOutcome {
            selection,
            payments,
            welfare,
            welfare_by_od,
            winners,
            deficits: Vec::new(),
            ir_violations,
        })
    }
}

/// Every selection profile satisfying the allocation constraints at `t`.
pub fn enumerate_feasible(
    bids: &BidProfile,
    sc: &Scenario,
    t: usize,
) -> Result<Vec<SelectionProfile>> {
    let (n, ods, horizon) = bids.dims();
    Ok(feasible_assignments(bids, sc, t, DEFAULT_PROFILE_CAP)?
        .iter()
        .map(|a| SelectionProfile::from_assignment(n, ods, horizon, t, a))
        .collect())
}

/// Welfare range over the feasible set at `t`.
pub fn sensitivity_delta(bids: &BidProfile, sc: &Scenario, t: usize) -> Result<f64> {
    // params do not influence Δ
    let params = AuctionParams {
        epsilon: 1.0,
        delta: 0.5,
    };
    ExactMechanism::new(bids, sc, params).delta(t)
}

pub fn exact_select<R: Rng + ?Sized>(
    bids: &BidProfile,
    sc: &Scenario,
    t: usize,
    params: AuctionParams,
    rng: &mut R,
) -> Result<SelectionProfile> {
    ExactMechanism::new(bids, sc, params).select(t, rng)
}

pub fn exact_payment(
    bids: &BidProfile,
    sc: &Scenario,
    t: usize,
    i: usize,
    params: AuctionParams,
) -> Result<f64> {
    ExactMechanism::new(bids, sc, params).payment(t, i)
}
