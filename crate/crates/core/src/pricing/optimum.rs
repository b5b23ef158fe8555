use std::collections::BTreeMap;

use serde::Serialize;

use super::response::{aggregate_response, response_for, StepResponse};
use super::PriceSchedule;
use crate::error::{Error, Result};
use crate::model::{CostFunction, Scenario};

fn check_shape(p: &PriceSchedule, sc: &Scenario) -> Result<()> {
    if p.num_od() != sc.num_od() || p.horizon() != sc.horizon() {
        return Err(Error::ShapeMismatch(format!(
            "schedule is {}x{}, scenario is {}x{}",
            p.num_od(),
            p.horizon(),
            sc.num_od(),
            sc.horizon()
        )));
    }
    Ok(())
}

/// Total social cost of a price schedule under best responses.
pub fn social_cost(p: &PriceSchedule, sc: &Scenario) -> Result<f64> {
    check_shape(p, sc)?;
    let mut total = 0.0;
    for s in 0..sc.num_od() {
        for t in 0..sc.horizon() {
            let r = aggregate_response(sc, s, t, p.price(s, t));
            total += r.total_cost() + sc.penalty(s) * r.deficit();
        }
    }
    Ok(total)
}

/// Time steps of one OD pair that share the same local set. A fixed price
/// draws the same responses at each of them; only the demand differs.
struct Group<'a> {
    members: Vec<(&'a CostFunction, f64)>,
    /// (demand, number of steps with that demand)
    demands: Vec<(f64, f64)>,
}

fn groups(sc: &Scenario, s: usize) -> Vec<Group<'_>> {
    let mut by_locals: BTreeMap<Vec<usize>, BTreeMap<u64, usize>> = BTreeMap::new();
    for t in 0..sc.horizon() {
        let locals: Vec<usize> = sc.local_passengers(s, t).collect();
        *by_locals
            .entry(locals)
            .or_default()
            .entry(sc.demand(s, t).to_bits())
            .or_default() += 1;
    }
    let pop = sc.population();
    by_locals
        .into_iter()
        .map(|(locals, demands)| Group {
            members: locals.iter().map(|&i| (&pop[i].cost, pop[i].capacity)).collect(),
            demands: demands
                .into_iter()
                .map(|(bits, n)| (f64::from_bits(bits), n as f64))
                .collect(),
        })
        .collect()
}

fn fixed_cost(groups: &[Group<'_>], beta: f64, price: f64) -> f64 {
    groups
        .iter()
        .map(|g| {
            let (mut offload, mut cost) = (0.0, 0.0);
            for &(c, cap) in &g.members {
                let q = response_for(c, cap, price);
                offload += q;
                cost += c.eval(q).unwrap_or(0.0);
            }
            g.demands
                .iter()
                .map(|&(demand, n)| n * (cost + beta * (demand - offload).max(0.0)))
                .sum::<f64>()
        })
        .sum()
}

/// Best fixed price per OD pair in hindsight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPriceOpt {
    pub prices: Vec<f64>,
    pub per_od_cost: Vec<f64>,
    pub total: f64,
}

/// Minimizes each OD pair's horizon cost over fixed prices in `[0, p_cap]`.
///
/// Scans a grid of step `grid_step` plus every kink of the responses, then
/// polishes the best point by golden-section search on the neighbouring
/// grid cells. Ties go to the lower price.
pub fn fixed_price_opt(sc: &Scenario, p_cap: f64, grid_step: f64) -> Result<FixedPriceOpt> {
    if !(p_cap > 0.0 && grid_step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "price cap {p_cap} and grid step {grid_step} must be positive"
        )));
    }
    let steps = (p_cap / grid_step).ceil() as usize;
    let mut prices = Vec::with_capacity(sc.num_od());
    let mut per_od_cost = Vec::with_capacity(sc.num_od());
    for s in 0..sc.num_od() {
        let gs = groups(sc, s);
        let beta = sc.penalty(s);
        let f = |p: f64| fixed_cost(&gs, beta, p);

        let mut candidates: Vec<f64> = (0..=steps).map(|k| (k as f64 * grid_step).min(p_cap)).collect();
        for g in &gs {
            for &(c, cap) in &g.members {
                match *c {
                    CostFunction::Linear { .. } => candidates.extend(c.linear_slope()),
                    CostFunction::Quadratic { a, b } => {
                        candidates.push(b);
                        candidates.push(b + 2.0 * a * cap);
                    }
                }
            }
        }
        candidates.retain(|p| (0.0..=p_cap).contains(p));
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();

        let (mut best_p, mut best) = (0.0, f64::INFINITY);
        for &p in &candidates {
            let v = f(p);
            if v < best {
                best = v;
                best_p = p;
            }
        }
        let (p, v) = golden_section(&f, (best_p - grid_step).max(0.0), (best_p + grid_step).min(p_cap));
        if v < best {
            best = v;
            best_p = p;
        }
        prices.push(best_p);
        per_od_cost.push(best);
    }
    let total = per_od_cost.iter().sum();
    Ok(FixedPriceOpt {
        prices,
        per_od_cost,
        total,
    })
}

fn golden_section(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if hi - lo < 1e-12 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Regret of a price schedule against the best fixed prices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport {
    /// Social cost of the schedule.
    pub realized_cost: f64,
    /// Best fixed-price social cost.
    pub optimal_cost: f64,
    pub fixed_prices: Vec<f64>,
    pub regret: f64,
    /// `R(t)` summed over OD pairs, for t = 1..T.
    pub cumulative_regret: Vec<f64>,
    /// `R(t)` per OD pair.
    pub cumulative_by_od: Vec<Vec<f64>>,
    /// Upper bound with `k = g·h + β h·1`.
    pub bound: f64,
    /// Upper bound with `k = 1[p* ≥ p] β h·1 - g·h`.
    pub bound_alt: f64,
    /// Bound terms dropped because no local passenger had a positive
    /// marginal cost (`g·1 = 0`).
    pub skipped_terms: usize,
    /// Largest marginal cost of any passenger at any step.
    pub g_max: f64,
    /// Smallest `g·1` over all steps.
    pub g_min: f64,
    pub k_max: f64,
}

impl RegretReport {
    pub fn average_regret(&self) -> Vec<f64> {
        self.cumulative_regret
            .iter()
            .enumerate()
            .map(|(t, r)| r / (t + 1) as f64)
            .collect()
    }

    /// True when every `g·1` was positive, so the bound is fully defined.
    pub fn bound_applies(&self) -> bool {
        self.skipped_terms == 0
    }
}

/// Regret of `p` on `sc`, optimizing the fixed prices on the given grid.
pub fn regret(p: &PriceSchedule, sc: &Scenario, grid_step: f64) -> Result<RegretReport> {
    let opt = fixed_price_opt(sc, p.p_cap(), grid_step)?;
    regret_against(p, sc, &opt)
}

pub(crate) fn regret_against(p: &PriceSchedule, sc: &Scenario, opt: &FixedPriceOpt) -> Result<RegretReport> {
    check_shape(p, sc)?;
    let (num_od, horizon) = (sc.num_od(), sc.horizon());
    let n = sc.num_passengers() as f64;
    let steps: Vec<Vec<StepResponse>> = (0..num_od)
        .map(|s| (0..horizon).map(|t| aggregate_response(sc, s, t, p.price(s, t))).collect())
        .collect();
    let g_max = steps.iter().flatten().map(StepResponse::gradient_max).fold(0.0, f64::max);

    let mut realized = 0.0;
    let mut optimal = 0.0;
    let mut cumulative_by_od = vec![Vec::with_capacity(horizon); num_od];
    let (mut bound, mut bound_alt, mut skipped) = (0.0, 0.0, 0);
    let (mut g_min, mut k_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let p_cap = p.p_cap();
    for s in 0..num_od {
        let beta = sc.penalty(s);
        let star = opt.prices[s];
        let mut acc = 0.0;
        for (t, r) in steps[s].iter().enumerate() {
            let here = r.total_cost() + beta * r.deficit();
            let best = {
                let o = aggregate_response(sc, s, t, star);
                o.total_cost() + beta * o.deficit()
            };
            realized += here;
            optimal += best;
            acc += here - best;
            cumulative_by_od[s].push(acc);

            let g1 = r.gradient_sum();
            let gh = r.gradient_dot_slope();
            let h1 = r.slope_sum();
            let k = gh + beta * h1;
            let below = if star >= r.price { 1.0 } else { 0.0 };
            let k_alt = below * beta * h1 - gh;
            g_min = g_min.min(g1);
            k_max = k_max.max(k);
            if g1 > 0.0 {
                let eta = p.etas()[t];
                let add = |k: f64| {
                    let mut term = eta * g_max * g_max * n * n * k / (2.0 * g1);
                    if t + 1 == horizon {
                        term += p_cap * p_cap * k / (2.0 * eta * g1);
                    }
                    term
                };
                bound += add(k);
                bound_alt += add(k_alt);
            } else {
                skipped += 1;
            }
        }
    }
    let cumulative_regret = (0..horizon)
        .map(|t| cumulative_by_od.iter().map(|row| row[t]).sum())
        .collect();
    Ok(RegretReport {
        realized_cost: realized,
        optimal_cost: optimal,
        fixed_prices: opt.prices.clone(),
        regret: realized - optimal,
        cumulative_regret,
        cumulative_by_od,
        bound,
        bound_alt,
        skipped_terms: skipped,
        g_max,
        g_min: if g_min.is_finite() { g_min } else { 0.0 },
        k_max: if k_max.is_finite() { k_max } else { 0.0 },
    })
}
