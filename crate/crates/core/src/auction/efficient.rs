use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{AuctionOutcome, AuctionParams, Deficit};
use crate::error::Result;
use crate::model::{BidProfile, Scenario, SelectionProfile};
use crate::numeric::{sample_index, softmax};

/// Stopping rule for the per-OD draw loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionGuard {
    /// Draw until the selected offload covers demand.
    #[default]
    Coverage,
    /// Keep drawing while the number of winners is at most the demand
    /// value, as the loop condition is literally written.
    Cardinality,
}

/// Winners drawn for one OD pair at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedDraw {
    pub winners: Vec<usize>,
    pub covered: f64,
    pub demand: f64,
}

impl DecomposedDraw {
    pub fn deficit(&self) -> f64 {
        (self.demand - self.covered).max(0.0)
    }

    pub fn has_deficit(&self) -> bool {
        self.covered < self.demand
    }
}

/// Probability of each pool member being drawn first, with weights
/// `exp(ε′ (q − C̄))`. Pool members without a bid at (s, t) get zero.
pub fn first_pick_probabilities(
    bids: &BidProfile,
    s: usize,
    t: usize,
    pool: &[usize],
    eps_prime: f64,
) -> Vec<f64> {
    let lw: Vec<f64> = pool
        .iter()
        .map(|&i| {
            bids.get(i, s, t)
                .map_or(f64::NEG_INFINITY, |b| eps_prime * b.welfare())
        })
        .collect();
    softmax(&lw)
}

/// Draws winners for OD `s` at time `t` from `pool` one at a time until the
/// guard stops or no candidate is left.
#[allow(clippy::too_many_arguments)]
pub fn select_from_pool<R: Rng + ?Sized>(
    bids: &BidProfile,
    sc: &Scenario,
    s: usize,
    t: usize,
    pool: &[usize],
    eps_prime: f64,
    guard: SelectionGuard,
    rng: &mut R,
) -> DecomposedDraw {
    let demand = sc.demand(s, t);
    let mut candidates: Vec<(usize, f64, f64)> = pool
        .iter()
        .filter_map(|&i| bids.get(i, s, t).map(|b| (i, b.q, eps_prime * b.welfare())))
        .collect();
    let mut winners = Vec::new();
    let mut covered = 0.0;
    loop {
        let go_on = match guard {
            SelectionGuard::Coverage => covered < demand,
            SelectionGuard::Cardinality => (winners.len() as f64) <= demand,
        };
        if !go_on || candidates.is_empty() {
            break;
        }
        let lw: Vec<f64> = candidates.iter().map(|c| c.2).collect();
        let k = sample_index(&lw, rng.random::<f64>());
        let (i, q, _) = candidates.remove(k);
        winners.push(i);
        covered += q;
    }
    DecomposedDraw {
        winners,
        covered,
        demand,
    }
}

/// Decomposed selection for one OD pair over every passenger that bids
/// for it.
pub fn decomposed_select<R: Rng + ?Sized>(
    bids: &BidProfile,
    sc: &Scenario,
    s: usize,
    t: usize,
    params: AuctionParams,
    rng: &mut R,
) -> DecomposedDraw {
    let (n, _, _) = bids.dims();
    let pool: Vec<usize> = (0..n).collect();
    select_from_pool(
        bids,
        sc,
        s,
        t,
        &pool,
        params.eps_prime(),
        SelectionGuard::Coverage,
        rng,
    )
}

/// Payment to a winner of the decomposed auction:
///
/// `r = (q + z)·exp(ε′(q − C̄)) − ∫₀^{q+z} exp(ε′y) dy`, `z = C̄ / exp(ε′(q − C̄))`.
///
/// The value is returned as computed; it can be negative.
pub fn efficient_payment(q: f64, claimed_cost: f64, eps_prime: f64) -> f64 {
    let weight = (eps_prime * (q - claimed_cost)).exp();
    let z = claimed_cost / weight;
    let upper = q + z;
    upper * weight - (eps_prime * upper).exp_m1() / eps_prime
}

/// Runs the decomposed auction over the whole horizon.
///
/// Bids with negative welfare are dropped first. Within a time step the OD
/// pairs are processed in order and winners of earlier pairs leave the pool.
/// Time steps are independent and run in parallel, each on its own random
/// stream derived from a single draw of `rng`.
pub fn run_two_way<R: Rng + ?Sized>(
    bids: &BidProfile,
    sc: &Scenario,
    params: AuctionParams,
    rng: &mut R,
) -> Result<AuctionOutcome> {
    run_two_way_with(bids, sc, params, SelectionGuard::Coverage, rng)
}

pub fn run_two_way_with<R: Rng + ?Sized>(
    bids: &BidProfile,
    sc: &Scenario,
    params: AuctionParams,
    guard: SelectionGuard,
    rng: &mut R,
) -> Result<AuctionOutcome> {
    let (n, ods, horizon) = bids.dims();
    let filtered = bids.filter_nonnegative_welfare();
    let eps_prime = params.eps_prime();
    let seed: u64 = rng.random();

    let per_t: Vec<Vec<DecomposedDraw>> = (0..horizon)
        .into_par_iter()
        .map(|t| {
            let mut stream = ChaCha8Rng::seed_from_u64(seed);
            stream.set_stream(t as u64);
            let mut taken = vec![false; n];
            let mut draws = Vec::with_capacity(ods);
            for s in 0..ods {
                let pool: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
                let d = select_from_pool(&filtered, sc, s, t, &pool, eps_prime, guard, &mut stream);
                for &i in &d.winners {
                    taken[i] = true;
                }
                draws.push(d);
            }
            draws
        })
        .collect();

    let mut selection = SelectionProfile::empty(n, ods, horizon);
    let mut payments = BTreeMap::new();
    let mut welfare_by_od = vec![vec![0.0; horizon]; ods];
    let mut winners = vec![vec![Vec::new(); ods]; horizon];
    let mut deficits = Vec::new();
    let mut ir_violations = 0;
    for (t, draws) in per_t.into_iter().enumerate() {
        for (s, d) in draws.into_iter().enumerate() {
            for &i in &d.winners {
                let bid = filtered.get(i, s, t).expect("winners carry bids");
                selection.set(i, s, t, true);
                welfare_by_od[s][t] += bid.welfare();
                let r = efficient_payment(bid.q, bid.claimed_cost, eps_prime);
                if r < bid.claimed_cost {
                    ir_violations += 1;
                }
                payments.insert((i, s, t), r);
            }
            if d.has_deficit() {
                deficits.push(Deficit {
                    s,
                    t,
                    shortfall: d.deficit(),
                });
            }
            winners[t][s] = d.winners;
        }
    }
    let welfare = welfare_by_od.iter().flatten().sum();
    Ok(AuctionOutcome {
        selection,
        payments,
        welfare,
        welfare_by_od,
        winners,
        deficits,
        ir_violations,
    })
}
