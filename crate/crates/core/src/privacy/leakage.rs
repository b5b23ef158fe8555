use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::laplace_sample;
use super::ratio::price_bin;
use crate::auction::{Assignment, AuctionParams, ExactConfig, ExactMechanism};
use crate::error::{Error, Result};
use crate::model::{Bid, BidProfile, CostFunction, Scenario};
use crate::numeric::log_sum_exp;
use crate::pricing::{feedback_for, gradient_jump, ogd_update, PricingConfig};

/// Largest discrete input space the leakage routines will enumerate.
pub const MAX_PROFILES: usize = 10_000;

/// Min-entropy leakage of a channel under a uniform prior, in bits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakageReport {
    /// `H∞(V)`
    pub prior_bits: f64,
    /// `H∞(V | Y)`
    pub posterior_bits: f64,
    pub leakage_bits: f64,
    /// Monte Carlo standard error; zero for exact enumeration.
    pub stderr_bits: f64,
    pub inputs: usize,
    /// Distinct outputs enumerated or observed.
    pub outputs: usize,
    /// Monte Carlo sample count; zero for exact enumeration.
    pub samples: usize,
}

impl LeakageReport {
    fn exact(inputs: usize, outputs: usize, vulnerability: f64) -> Self {
        let prior_bits = (inputs as f64).log2();
        // Σ_y max_v Pr(y|v) lies in [1, min(|V|, |Y|)]; clamp rounding
        let leakage_bits = vulnerability.log2().clamp(0.0, prior_bits.min((outputs as f64).log2()));
        LeakageReport {
            prior_bits,
            posterior_bits: prior_bits - leakage_bits,
            leakage_bits,
            stderr_bits: 0.0,
            inputs,
            outputs,
            samples: 0,
        }
    }
}

/// Leakage of `channel[v][y] = Pr(y | v)` with every input equally likely.
pub fn min_entropy_leakage(channel: &[Vec<f64>]) -> Result<LeakageReport> {
    let outputs = channel.first().map_or(0, Vec::len);
    if channel.is_empty() || channel.iter().any(|row| row.len() != outputs) {
        return Err(Error::ShapeMismatch("channel rows must be nonempty and equally long".into()));
    }
    let vulnerability: f64 = (0..outputs)
        .map(|y| channel.iter().map(|row| row[y]).fold(0.0, f64::max))
        .sum();
    Ok(LeakageReport::exact(channel.len(), outputs, vulnerability))
}

fn cartesian_size(sizes: impl Iterator<Item = usize>) -> Result<usize> {
    let mut total: usize = 1;
    for n in sizes {
        total = total.saturating_mul(n.max(1));
        if total > MAX_PROFILES {
            return Err(Error::TooLarge { limit: MAX_PROFILES });
        }
    }
    Ok(total)
}

/// Mixed-radix decoding of profile number `k`.
fn choice_indices(mut k: usize, sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .map(|&n| {
            let n = n.max(1);
            let c = k % n;
            k /= n;
            c
        })
        .collect()
}

/// Discrete bid menu: `options[i]` lists passenger `i`'s possible bids at
/// time `t`, as (OD, bid). An empty list means the passenger never bids.
#[derive(Debug, Clone, PartialEq)]
pub struct BidSpace {
    pub t: usize,
    pub options: Vec<Vec<(usize, Bid)>>,
}

impl BidSpace {
    fn sizes(&self) -> Vec<usize> {
        self.options.iter().map(Vec::len).collect()
    }

    pub fn size(&self) -> Result<usize> {
        cartesian_size(self.sizes().into_iter())
    }

    /// Every bid profile in the space.
    pub fn profiles(&self, sc: &Scenario) -> Result<Vec<BidProfile>> {
        let sizes = self.sizes();
        (0..self.size()?)
            .map(|k| {
                let mut b = BidProfile::for_scenario(sc);
                for (i, c) in choice_indices(k, &sizes).into_iter().enumerate() {
                    if let Some(&(s, bid)) = self.options[i].get(c) {
                        b.insert(i, s, self.t, bid)?;
                    }
                }
                Ok(b)
            })
            .collect()
    }
}

/// Exact leakage of the enumerated auction's selection at `space.t`.
pub fn min_entropy_two_way(
    sc: &Scenario,
    space: &BidSpace,
    params: AuctionParams,
    config: ExactConfig,
) -> Result<LeakageReport> {
    let profiles = space.profiles(sc)?;
    let mut columns: BTreeMap<Assignment, Vec<f64>> = BTreeMap::new();
    for (k, b) in profiles.iter().enumerate() {
        let dist = ExactMechanism::with_config(b, sc, params, config).distribution(space.t)?;
        for (a, p) in dist.assignments.into_iter().zip(dist.probs) {
            columns.entry(a).or_insert_with(|| vec![0.0; profiles.len()])[k] += p;
        }
    }
    let vulnerability: f64 = columns
        .values()
        .map(|col| col.iter().copied().fold(0.0, f64::max))
        .sum();
    Ok(LeakageReport::exact(profiles.len(), columns.len(), vulnerability))
}

/// Discrete cost menu: `options[i]` lists passenger `i`'s possible cost
/// functions. An empty list keeps the scenario's own function.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpace {
    pub options: Vec<Vec<CostFunction>>,
}

impl CostSpace {
    fn sizes(&self) -> Vec<usize> {
        self.options.iter().map(Vec::len).collect()
    }

    pub fn size(&self) -> Result<usize> {
        cartesian_size(self.sizes().into_iter())
    }

    fn profiles(&self, sc: &Scenario) -> Result<Vec<Vec<CostFunction>>> {
        if self.options.len() != sc.num_passengers() {
            return Err(Error::ShapeMismatch(format!(
                "cost space covers {} passengers, scenario has {}",
                self.options.len(),
                sc.num_passengers()
            )));
        }
        let sizes = self.sizes();
        Ok((0..self.size()?)
            .map(|k| {
                choice_indices(k, &sizes)
                    .into_iter()
                    .enumerate()
                    .map(|(i, c)| {
                        self.options[i]
                            .get(c)
                            .cloned()
                            .unwrap_or_else(|| sc.population()[i].cost.clone())
                    })
                    .collect()
            })
            .collect())
    }
}

/// Monte Carlo settings for the posted-price leakage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneWayLeakage {
    pub samples: usize,
    pub seed: u64,
    /// Bin width as a fraction of `Δp`.
    pub bin_fraction: f64,
}

impl Default for OneWayLeakage {
    fn default() -> Self {
        OneWayLeakage {
            samples: 100_000,
            seed: 0,
            bin_fraction: 0.1,
        }
    }
}

/// The posted-price mechanism restricted to a discrete cost space.
struct PriceChannel<'a> {
    sc: &'a Scenario,
    cfg: &'a PricingConfig,
    profiles: Vec<Vec<CostFunction>>,
    /// `locals[t][s]`
    locals: Vec<Vec<Vec<usize>>>,
    etas: Vec<f64>,
}

impl PriceChannel<'_> {
    fn next_center(&self, k: usize, s: usize, t: usize, price: f64) -> f64 {
        let costs = &self.profiles[k];
        let pop = self.sc.population();
        let members = self.locals[t][s].iter().map(|&i| (&costs[i], pop[i].capacity));
        let fb = feedback_for(members, self.sc.demand(s, t), price);
        ogd_update(price, &fb, self.etas[t], self.sc.penalty(s), self.cfg.mode, self.cfg.p_cap)
            .unwrap_or(price)
    }
}

/// `ln Pr(lo <= X < hi)` for `X ~ Laplace(c, b)`, stable in both tails.
fn ln_interval(lo: f64, hi: f64, c: f64, b: f64) -> f64 {
    // ln(1 - e^{-(hi - lo)/b}), zero for an unbounded interval
    let width_term = (-(-(hi - lo) / b).exp()).ln_1p();
    if hi <= c {
        0.5f64.ln() + (hi - c) / b + width_term
    } else if lo >= c {
        0.5f64.ln() - (lo - c) / b + width_term
    } else {
        (1.0 - 0.5 * ((lo - c) / b).exp() - 0.5 * (-(hi - c) / b).exp()).ln()
    }
}

/// Leakage of the posted-price mechanism after each horizon in `horizons`.
///
/// The observer sees every OD price after the first `T` rounds of
/// responses. Prices are published on a grid of width `bin_fraction · Δp`
/// (the noisy value rounded to its bin centre) and passengers respond to
/// the published value, so the likelihood of a price path is exact. The
/// same sample paths serve every horizon.
///
/// Without noise the mechanism is deterministic and the leakage is the
/// log of the number of distinct price paths.
pub fn min_entropy_one_way(
    sc: &Scenario,
    space: &CostSpace,
    cfg: &PricingConfig,
    horizons: &[usize],
    mc: OneWayLeakage,
) -> Result<Vec<LeakageReport>> {
    cfg.validate()?;
    let t_max = horizons.iter().copied().max().unwrap_or(0);
    if t_max > sc.horizon() {
        return Err(Error::InvalidParameter(format!(
            "horizon {t_max} exceeds the scenario's {} steps",
            sc.horizon()
        )));
    }
    let profiles = space.profiles(sc)?;
    if profiles.is_empty() || sc.num_passengers() == 0 {
        return Err(Error::EmptyPopulation);
    }
    let k_count = profiles.len();
    let etas = cfg.eta.rates(sc.horizon());
    let worst = profiles.iter().flatten().map(gradient_jump).fold(0.0, f64::max);
    let delta_p = (etas.first().copied().unwrap_or(0.0) * worst).max(cfg.delta_p_min);
    let locals = (0..sc.horizon())
        .map(|t| (0..sc.num_od()).map(|s| sc.local_passengers(s, t).collect()).collect())
        .collect();
    let ch = PriceChannel {
        sc,
        cfg,
        profiles,
        locals,
        etas,
    };
    let prior_bits = (k_count as f64).log2();

    if !cfg.dp {
        let paths: Vec<Vec<u64>> = (0..k_count)
            .map(|k| {
                let mut prices = vec![cfg.p_init; sc.num_od()];
                let mut path = Vec::with_capacity(t_max * sc.num_od());
                for t in 0..t_max {
                    for (s, p) in prices.iter_mut().enumerate() {
                        *p = ch.next_center(k, s, t, *p);
                        path.push(p.to_bits());
                    }
                }
                path
            })
            .collect();
        return Ok(horizons
            .iter()
            .map(|&h| {
                let distinct: BTreeSet<&[u64]> =
                    paths.iter().map(|p| &p[..h * sc.num_od()]).collect();
                LeakageReport::exact(k_count, distinct.len(), distinct.len() as f64)
            })
            .collect());
    }

    if !(mc.bin_fraction > 0.0) || mc.samples == 0 {
        return Err(Error::InvalidParameter(
            "leakage estimation needs samples and a positive bin width".into(),
        ));
    }
    let width = delta_p * mc.bin_fraction;
    let scale = delta_p / cfg.epsilon;
    let p_cap = cfg.p_cap;
    let top = price_bin(p_cap, width, p_cap);
    let centre = |bin: i64| ((bin as f64 + 0.5) * width).min(p_cap);
    let bounds = |bin: i64| {
        let lo = if bin == 0 { f64::NEG_INFINITY } else { bin as f64 * width };
        let hi = if bin == top { f64::INFINITY } else { (bin + 1) as f64 * width };
        (lo, hi)
    };

    // per sample: K · max posterior at each requested horizon
    let values: Vec<Vec<f64>> = (0..mc.samples)
        .into_par_iter()
        .map(|j| -> Result<Vec<f64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
            rng.set_stream(j as u64);
            let v = j % k_count;
            let mut prices = Vec::with_capacity(sc.num_od());
            for _ in 0..sc.num_od() {
                let x = cfg.p_init + laplace_sample(scale, &mut rng)?;
                prices.push(centre(price_bin(x, width, p_cap)));
            }
            let mut loglik = vec![0.0; k_count];
            let mut at = vec![0.0; t_max + 1];
            at[0] = 1.0;
            for t in 0..t_max {
                for (s, slot) in prices.iter_mut().enumerate() {
                    let price = *slot;
                    let x = ch.next_center(v, s, t, price) + laplace_sample(scale, &mut rng)?;
                    let bin = price_bin(x, width, p_cap);
                    let (lo, hi) = bounds(bin);
                    for (k, ll) in loglik.iter_mut().enumerate() {
                        *ll += ln_interval(lo, hi, ch.next_center(k, s, t, price), scale);
                    }
                    *slot = centre(bin);
                }
                let best = loglik.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                at[t + 1] = k_count as f64 * (best - log_sum_exp(&loglik)).exp();
            }
            Ok(horizons.iter().map(|&h| at[h]).collect())
        })
        .collect::<Result<_>>()?;

    let n = mc.samples as f64;
    Ok((0..horizons.len())
        .map(|h| {
            let mean = values.iter().map(|v| v[h]).sum::<f64>() / n;
            let var = if mc.samples > 1 {
                values.iter().map(|v| (v[h] - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let leakage_bits = mean.log2().clamp(0.0, prior_bits);
            LeakageReport {
                prior_bits,
                posterior_bits: prior_bits - leakage_bits,
                leakage_bits,
                stderr_bits: (var / n).sqrt() / (mean * std::f64::consts::LN_2),
                inputs: k_count,
                outputs: if horizons[h] == 0 { 1 } else { mc.samples },
                samples: mc.samples,
            }
        })
        .collect())
}
