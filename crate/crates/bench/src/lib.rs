//! Fixtures shared by the benchmarks.

use offload_core::harness::{build_scenario, generate_synthetic, SyntheticTraffic};
use offload_core::model::{Bid, CostFamily, CostFunction, Passenger, PopulationSpec};
use offload_core::{BidProfile, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Five roads over 24 hours with `n` sampled passengers.
pub fn case_study(n: usize, family: CostFamily) -> Scenario {
    let table = generate_synthetic(&SyntheticTraffic::default()).expect("default traffic");
    let pop = PopulationSpec {
        n,
        family,
        ..PopulationSpec::default()
    };
    build_scenario(&table, &pop, 0.02, 1.0).expect("valid case study").scenario
}

/// `n` passengers on one OD pair with random linear bids, small enough to
/// enumerate.
pub fn enumerable(n: usize, seed: u64) -> (Scenario, BidProfile) {
    let mut r = rng(seed);
    let pop: Vec<Passenger> = (0..n as u32)
        .map(|id| Passenger {
            id,
            capacity: 1.0,
            cost: CostFunction::linear_rate(r.random_range(0.1..0.9)),
            local_od: vec![0],
        })
        .collect();
    let sc = Scenario::new(vec![vec![n as f64 / 2.0]], vec![1.0], pop).expect("valid instance");
    let mut bids = BidProfile::for_scenario(&sc);
    for i in 0..n {
        bids.insert(i, 0, 0, Bid::new(1.0, r.random_range(0.1..0.9)))
            .expect("valid bid");
    }
    (sc, bids)
}
