use serde::Serialize;

use crate::auction::{AuctionParams, DeltaMode, ExactConfig};
use crate::error::Result;
use crate::pricing::PricingConfig;
use crate::privacy::{
    auction_ratio_check, min_entropy_one_way, min_entropy_two_way, AdjacentPair, LeakageReport,
    OneWayLeakage,
};

use super::scenario::{one_way_leakage_instance, two_way_leakage_instance};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoWayAudit {
    pub epsilon: f64,
    pub delta: f64,
    pub leakage: LeakageReport,
    /// Largest exact log-ratio over every adjacent pair of the bid space.
    pub max_log_ratio: f64,
    pub adjacent_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneWayAudit {
    pub epsilon: f64,
    pub horizons: Vec<usize>,
    pub leakage: Vec<LeakageReport>,
    /// `(T − Σ_{t<T} η_t) ε` at the longest horizon, as computed.
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyAudit {
    pub two_way: TwoWayAudit,
    pub one_way: OneWayAudit,
}

/// Leakage and exact ratio test of the enumerated auction on the built-in
/// two-passenger instance.
pub fn audit_two_way(params: AuctionParams) -> Result<TwoWayAudit> {
    let (sc, space) = two_way_leakage_instance();
    let cfg = ExactConfig {
        delta_mode: DeltaMode::OffloadBound,
        ..ExactConfig::default()
    };
    let leakage = min_entropy_two_way(&sc, &space, params, cfg)?;
    let profiles = space.profiles(&sc)?;
    let mut max_log_ratio: f64 = 0.0;
    let mut adjacent_pairs = 0;
    for (k, a) in profiles.iter().enumerate() {
        for b in &profiles[k + 1..] {
            if let Ok(pair) = AdjacentPair::bids(a.clone(), b.clone()) {
                let r = auction_ratio_check(&pair, &sc, params, cfg, space.t)?;
                max_log_ratio = max_log_ratio.max(r.max_log_ratio);
                adjacent_pairs += 1;
            }
        }
    }
    Ok(TwoWayAudit {
        epsilon: params.epsilon,
        delta: params.delta,
        leakage,
        max_log_ratio,
        adjacent_pairs,
    })
}

/// Leakage of the posted-price mechanism on the built-in two-passenger
/// instance after each horizon.
pub fn audit_one_way(
    pricing: &PricingConfig,
    horizons: &[usize],
    mc: OneWayLeakage,
) -> Result<OneWayAudit> {
    let t_max = horizons.iter().copied().max().unwrap_or(0);
    let (sc, space) = one_way_leakage_instance(t_max);
    let leakage = min_entropy_one_way(&sc, &space, pricing, horizons, mc)?;
    Ok(OneWayAudit {
        epsilon: pricing.epsilon,
        horizons: horizons.to_vec(),
        leakage,
        budget: pricing.privacy_budget(t_max),
    })
}

pub fn privacy_audit(
    params: AuctionParams,
    pricing: &PricingConfig,
    horizons: &[usize],
    mc: OneWayLeakage,
) -> Result<PrivacyAudit> {
    Ok(PrivacyAudit {
        two_way: audit_two_way(params)?,
        one_way: audit_one_way(pricing, horizons, mc)?,
    })
}
