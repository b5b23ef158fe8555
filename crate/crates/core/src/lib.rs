//! Differentially private incentive mechanisms that pay passengers to move
//! trips from private cars to public transit.
//!
//! Two settings are covered:
//!
//! * **two-way**: passengers bid offload and cost; the government runs a
//!   reverse auction ([`auction`]) built on the exponential mechanism.
//! * **one-way**: the government posts a price per OD pair, observes the
//!   responses, and adapts the price by online gradient descent with
//!   Laplace-perturbed publication ([`pricing`]).
//!
//! [`privacy`] measures the privacy of both (ratio tests and min-entropy
//! leakage) and [`harness`] wires everything into reproducible
//! experiments.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auction;
pub mod error;
pub mod harness;
pub mod model;
pub mod numeric;
pub mod pricing;
pub mod privacy;

pub use auction::{AuctionOutcome, AuctionParams};
pub use error::{Error, Result};
pub use model::{Bid, BidProfile, CostFunction, Passenger, PopulationSpec, Scenario, SelectionProfile};
pub use pricing::{PriceSchedule, PricingConfig, RegretReport};
