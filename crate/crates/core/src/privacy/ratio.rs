use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::Serialize;

use super::laplace_sample;
use crate::auction::{Assignment, AuctionParams, ExactConfig, ExactMechanism};
use crate::error::{Error, Result};
use crate::model::{BidProfile, Passenger, Scenario};

/// Two inputs that differ in at most one passenger's entries.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacentPair<T> {
    pub first: T,
    pub second: T,
    /// The passenger whose entries differ; `None` for identical inputs.
    pub index: Option<usize>,
}

fn single_difference(diff: BTreeSet<usize>) -> Result<Option<usize>> {
    match diff.len() {
        0 => Ok(None),
        1 => Ok(diff.into_iter().next()),
        _ => Err(Error::InvalidParameter(format!(
            "inputs differ in passengers {diff:?}, expected at most one"
        ))),
    }
}

impl AdjacentPair<BidProfile> {
    pub fn bids(first: BidProfile, second: BidProfile) -> Result<Self> {
        if first.dims() != second.dims() {
            return Err(Error::ShapeMismatch("bid profiles have different shapes".into()));
        }
        let keys: BTreeSet<_> = first.iter().chain(second.iter()).map(|(k, _)| k).collect();
        let diff = keys
            .into_iter()
            .filter(|&(i, s, t)| first.get(i, s, t) != second.get(i, s, t))
            .map(|(i, _, _)| i)
            .collect();
        let index = single_difference(diff)?;
        Ok(AdjacentPair {
            first,
            second,
            index,
        })
    }
}

impl AdjacentPair<Vec<Passenger>> {
    pub fn populations(first: Vec<Passenger>, second: Vec<Passenger>) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::ShapeMismatch("populations have different sizes".into()));
        }
        let diff = first
            .iter()
            .zip(&second)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| i)
            .collect();
        let index = single_difference(diff)?;
        Ok(AdjacentPair {
            first,
            second,
            index,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactCell<K> {
    /// `None` for the pooled cell of zero-probability outcomes.
    pub cell: Option<K>,
    pub p1: f64,
    pub p2: f64,
    pub log_ratio: f64,
}

/// Enumerated comparison of two output distributions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactRatioReport<K> {
    pub cells: Vec<ExactCell<K>>,
    /// Largest `|ln(p1/p2)|` over cells.
    pub max_log_ratio: f64,
    /// Outcomes with zero probability under exactly one input, pooled into
    /// a single cell.
    pub merged: usize,
}

/// Compares two enumerated distributions cell by cell.
///
/// Outcomes impossible under both inputs are dropped; outcomes possible
/// under only one are pooled into one cell before taking ratios.
pub fn exact_ratio<K: Ord + Clone>(
    d1: &BTreeMap<K, f64>,
    d2: &BTreeMap<K, f64>,
) -> ExactRatioReport<K> {
    let keys: BTreeSet<&K> = d1.keys().chain(d2.keys()).collect();
    let mut cells = Vec::new();
    let (mut pool1, mut pool2, mut merged) = (0.0, 0.0, 0);
    for k in keys {
        let p1 = d1.get(k).copied().unwrap_or(0.0);
        let p2 = d2.get(k).copied().unwrap_or(0.0);
        match (p1 > 0.0, p2 > 0.0) {
            (true, true) => cells.push(ExactCell {
                cell: Some(k.clone()),
                p1,
                p2,
                log_ratio: (p1 / p2).ln(),
            }),
            (false, false) => {}
            _ => {
                pool1 += p1;
                pool2 += p2;
                merged += 1;
            }
        }
    }
    if merged > 0 {
        cells.push(ExactCell {
            cell: None,
            p1: pool1,
            p2: pool2,
            log_ratio: (pool1 / pool2).ln(),
        });
    }
    let max_log_ratio = cells.iter().map(|c| c.log_ratio.abs()).fold(0.0, f64::max);
    ExactRatioReport {
        cells,
        max_log_ratio,
        merged,
    }
}

/// Exact ratio test of the enumerated auction at time `t`.
pub fn auction_ratio_check(
    pair: &AdjacentPair<BidProfile>,
    sc: &Scenario,
    params: AuctionParams,
    config: ExactConfig,
    t: usize,
) -> Result<ExactRatioReport<Assignment>> {
    let d1 = ExactMechanism::with_config(&pair.first, sc, params, config).distribution(t)?;
    let d2 = ExactMechanism::with_config(&pair.second, sc, params, config).distribution(t)?;
    Ok(exact_ratio(&d1.as_map(), &d2.as_map()))
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledCell<K> {
    pub cell: K,
    pub count1: u64,
    pub count2: u64,
    /// Point estimate of `ln(p1/p2)`; infinite when one count is zero.
    pub log_ratio: f64,
    /// Interval for `|ln(p1/p2)|` implied by the two Wilson intervals.
    pub abs_lower: f64,
    pub abs_upper: f64,
}

/// Frequency-based comparison with confidence intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledRatioReport<K> {
    pub cells: Vec<SampledCell<K>>,
    pub trials1: u64,
    pub trials2: u64,
    pub z: f64,
    /// Largest lower confidence bound on `|ln(p1/p2)|`.
    pub max_lower: f64,
    /// Largest finite point estimate of `|ln(p1/p2)|`.
    pub max_point: f64,
}

impl<K> SampledRatioReport<K> {
    /// No cell's interval lies entirely above `claim`.
    pub fn consistent_with(&self, claim: f64) -> bool {
        self.max_lower <= claim
    }
}

pub fn sampled_ratio<K: Ord + Clone>(
    c1: &BTreeMap<K, u64>,
    n1: u64,
    c2: &BTreeMap<K, u64>,
    n2: u64,
    z: f64,
) -> SampledRatioReport<K> {
    let keys: BTreeSet<&K> = c1.keys().chain(c2.keys()).collect();
    let mut cells = Vec::with_capacity(keys.len());
    for k in keys {
        let a = c1.get(k).copied().unwrap_or(0);
        let b = c2.get(k).copied().unwrap_or(0);
        let (lo1, hi1) = wilson_interval(a, n1, z);
        let (lo2, hi2) = wilson_interval(b, n2, z);
        let up = (lo1 / hi2).ln().max(0.0);
        let down = (lo2 / hi1).ln().max(0.0);
        let abs_lower = up.max(down);
        let abs_upper = (hi1 / lo2).ln().max((hi2 / lo1).ln());
        let log_ratio = ((a as f64 / n1 as f64) / (b as f64 / n2 as f64)).ln();
        cells.push(SampledCell {
            cell: k.clone(),
            count1: a,
            count2: b,
            log_ratio,
            abs_lower,
            abs_upper,
        });
    }
    let max_lower = cells.iter().map(|c| c.abs_lower).fold(0.0, f64::max);
    let max_point = cells
        .iter()
        .map(|c| c.log_ratio.abs())
        .filter(|r| r.is_finite())
        .fold(0.0, f64::max);
    SampledRatioReport {
        cells,
        trials1: n1,
        trials2: n2,
        z,
        max_lower,
        max_point,
    }
}

/// Bin index of a published price on a grid of width `width` over
/// `[0, p_cap]`; the top bin also holds `p_cap` itself.
pub fn price_bin(price: f64, width: f64, p_cap: f64) -> i64 {
    let top = (p_cap / width).floor() as i64;
    ((price.clamp(0.0, p_cap) / width).floor() as i64).min(top)
}

/// Sampled ratio test of the noisy price publication for two update
/// centers, binned at `Δp/10`.
#[allow(clippy::too_many_arguments)]
pub fn price_ratio_check<R: Rng + ?Sized>(
    center1: f64,
    center2: f64,
    delta_p: f64,
    epsilon: f64,
    p_cap: f64,
    trials: u64,
    z: f64,
    rng: &mut R,
) -> Result<SampledRatioReport<i64>> {
    let width = delta_p / 10.0;
    let scale = delta_p / epsilon;
    let draw = |c: f64, rng: &mut R| -> Result<BTreeMap<i64, u64>> {
        let mut counts = BTreeMap::new();
        for _ in 0..trials {
            let p = c + laplace_sample(scale, rng)?;
            *counts.entry(price_bin(p, width, p_cap)).or_insert(0) += 1;
        }
        Ok(counts)
    };
    let c1 = draw(center1, rng)?;
    let c2 = draw(center2, rng)?;
    Ok(sampled_ratio(&c1, trials, &c2, trials, z))
}
