//! Passengers, cost functions, demand scenarios, bids and selections.

mod bids;
mod cost;
mod population;
mod scenario;

pub use bids::{
    check_feasible, check_feasible_at, social_welfare, Bid, BidProfile, BidRecord,
    SelectionProfile,
};
pub use cost::CostFunction;
pub use population::{sample_population, CostFamily, PopulationSpec};
pub use scenario::{Passenger, Scenario};
