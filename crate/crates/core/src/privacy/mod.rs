//! Privacy checks and measurements for both mechanisms.
//!
//! Ratio tests compare output distributions on adjacent inputs, either by
//! enumeration or from samples with Wilson intervals. Min-entropy leakage
//! quantifies how many bits an observer learns about the private inputs
//! under a uniform prior.

mod laplace;
mod leakage;
mod ratio;

pub use laplace::{laplace_cdf, laplace_from_uniform, laplace_sample};
pub use leakage::{
    min_entropy_leakage, min_entropy_one_way, min_entropy_two_way, BidSpace, CostSpace,
    LeakageReport, OneWayLeakage, MAX_PROFILES,
};
pub use ratio::{
    auction_ratio_check, exact_ratio, price_bin, price_ratio_check, sampled_ratio,
    wilson_interval, AdjacentPair, ExactCell, ExactRatioReport, SampledCell, SampledRatioReport,
};
