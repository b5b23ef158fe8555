use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::ogd::ogd_update;
use super::optimum::{fixed_price_opt, regret_against, RegretReport};
use super::response::aggregate_response;
use super::{PriceSchedule, PricingConfig};
use crate::error::{Error, Result};
use crate::model::{CostFunction, Scenario};
use crate::privacy::laplace_sample;

/// Largest change of the next price caused by moving one passenger's
/// offload by one unit, scaled by `eta1` and floored at `floor`.
///
/// For a quadratic passenger the worst move is entering at one unit
/// (`2a + b`), which also covers the `2a` change within participation. A
/// linear passenger only moves the price by entering or leaving (`c`).
pub fn price_sensitivity(sc: &Scenario, eta1: f64, floor: f64) -> Result<f64> {
    if sc.population().is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let worst = sc
        .population()
        .iter()
        .map(|p| gradient_jump(&p.cost))
        .fold(0.0, f64::max);
    Ok((eta1 * worst).max(floor))
}

/// Largest change of one passenger's feedback under a unit offload move.
pub fn gradient_jump(cost: &CostFunction) -> f64 {
    match *cost {
        CostFunction::Quadratic { a, b } => 2.0 * a + b,
        CostFunction::Linear { .. } => cost.linear_slope().unwrap_or(0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbedPrice {
    pub published: f64,
    pub unclipped: f64,
}

/// Adds Laplace(Δp/ε) noise to `p_star` and clips into `[0, p_cap]`.
pub fn dp_price<R: Rng + ?Sized>(
    p_star: f64,
    delta_p: f64,
    epsilon: f64,
    p_cap: f64,
    rng: &mut R,
) -> Result<PerturbedPrice> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(delta_p > 0.0) {
        return Err(Error::InvalidParameter(format!("sensitivity must be positive, got {delta_p}")));
    }
    let unclipped = p_star + laplace_sample(delta_p / epsilon, rng)?;
    Ok(PerturbedPrice {
        published: unclipped.clamp(0.0, p_cap),
        unclipped,
    })
}

/// One row of the price trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRow {
    pub t: usize,
    pub s: usize,
    pub price_published: f64,
    pub price_unclipped: f64,
    pub total_offload: f64,
    pub deficit: f64,
    pub cost: f64,
    pub cumulative_regret: f64,
    /// Smallest passenger utility at this step.
    pub min_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneWayRun {
    pub rows: Vec<StepRow>,
    #[serde(skip)]
    pub schedule: PriceSchedule,
    pub report: RegretReport,
    pub delta_p: f64,
    /// `(T - Σ_{t<T} η_t) ε` as computed; `None` without noise.
    pub privacy_budget: Option<f64>,
}

impl OneWayRun {
    /// Budget that can actually be claimed (never below zero).
    pub fn claimed_budget(&self) -> Option<f64> {
        self.privacy_budget.map(|b| b.max(0.0))
    }

    pub fn min_utility(&self) -> f64 {
        self.rows.iter().map(|r| r.min_utility).fold(0.0, f64::min)
    }
}

/// Closed loop of publish, respond, update for every OD pair.
///
/// OD pairs run in parallel, each on its own random stream of `seed`.
pub fn run_one_way(sc: &Scenario, cfg: &PricingConfig, seed: u64) -> Result<OneWayRun> {
    cfg.validate()?;
    let horizon = sc.horizon();
    let etas = cfg.eta.rates(horizon);
    let delta_p = price_sensitivity(sc, etas.first().copied().unwrap_or(cfg.eta.c), cfg.delta_p_min)?;

    let per_od: Vec<Vec<(f64, f64, super::StepResponse)>> = (0..sc.num_od())
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let mut center = cfg.p_init;
            let mut out = Vec::with_capacity(horizon);
            for (t, &eta) in etas.iter().enumerate() {
                let price = if cfg.dp {
                    dp_price(center, delta_p, cfg.epsilon, cfg.p_cap, &mut rng)?
                } else {
                    PerturbedPrice {
                        published: center.clamp(0.0, cfg.p_cap),
                        unclipped: center,
                    }
                };
                let resp = aggregate_response(sc, s, t, price.published);
                center = ogd_update(
                    price.published,
                    &resp.feedback(),
                    eta,
                    sc.penalty(s),
                    cfg.mode,
                    cfg.p_cap,
                )?;
                out.push((price.published, price.unclipped, resp));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let prices = per_od
        .iter()
        .map(|row| row.iter().map(|x| x.0).collect())
        .collect();
    let schedule = PriceSchedule::new(prices, etas, cfg.p_cap)?;
    let opt = fixed_price_opt(sc, cfg.p_cap, cfg.grid_step)?;
    let report = regret_against(&schedule, sc, &opt)?;

    let mut rows = Vec::with_capacity(sc.num_od() * horizon);
    for t in 0..horizon {
        for (s, steps) in per_od.iter().enumerate() {
            let (published, unclipped, resp) = &steps[t];
            rows.push(StepRow {
                t,
                s,
                price_published: *published,
                price_unclipped: *unclipped,
                total_offload: resp.total_offload(),
                deficit: resp.deficit(),
                cost: resp.total_cost() + sc.penalty(s) * resp.deficit(),
                cumulative_regret: report.cumulative_by_od[s][t],
                min_utility: resp.min_utility(),
            });
        }
    }
    Ok(OneWayRun {
        rows,
        schedule,
        report,
        delta_p,
        privacy_budget: cfg.dp.then(|| cfg.privacy_budget(horizon)),
    })
}
