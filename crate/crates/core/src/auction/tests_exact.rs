use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::{
    check_feasible_at, social_welfare, Bid, BidProfile, CostFunction, Passenger, Scenario,
    SelectionProfile,
};

pub(super) fn scenario(n: usize, ods: usize, demand: Vec<f64>) -> Scenario {
    let pop = (0..n)
        .map(|i| Passenger {
            id: i as u32,
            capacity: 1.0,
            cost: CostFunction::linear_rate(0.5),
            local_od: vec![i % ods],
        })
        .collect();
    Scenario::new(demand.into_iter().map(|d| vec![d]).collect(), vec![1.0; ods], pop).unwrap()
}

/// Filters all 2^(N·S) binary tensors through the feasibility check.
fn brute_feasible(b: &BidProfile, sc: &Scenario, t: usize) -> Vec<SelectionProfile> {
    let (n, ods, horizon) = b.dims();
    let cells = n * ods;
    let mut out = Vec::new();
    for mask in 0u64..(1 << cells) {
        let mut x = SelectionProfile::empty(n, ods, horizon);
        for k in 0..cells {
            if mask >> k & 1 == 1 {
                x.set(k / ods, k % ods, t, true);
            }
        }
        if check_feasible_at(&x, b, sc, t).unwrap() {
            out.push(x);
        }
    }
    out.sort();
    out
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize, ods: usize) -> (BidProfile, Scenario) {
    let demand: Vec<f64> = (0..ods).map(|_| rng.random_range(0.0..1.5)).collect();
    let sc = scenario(n, ods, demand);
    let mut b = BidProfile::for_scenario(&sc);
    for i in 0..n {
        for s in 0..ods {
            if rng.random_bool(0.7) {
                let q = rng.random_range(0.1..2.0);
                let c = rng.random_range(0.0..q);
                b.insert(i, s, 0, Bid::new(q, c)).unwrap();
            }
        }
    }
    (b, sc)
}

#[test]
fn single_passenger_without_demand_has_two_profiles() {
    let sc = scenario(1, 1, vec![0.0]);
    let mut b = BidProfile::for_scenario(&sc);
    b.insert(0, 0, 0, Bid::new(1.0, 0.5)).unwrap();
    assert_eq!(enumerate_feasible(&b, &sc, 0).unwrap().len(), 2);
}

#[test]
fn demand_above_total_volume_is_infeasible() {
    let sc = scenario(2, 1, vec![10.0]);
    let mut b = BidProfile::for_scenario(&sc);
    b.insert(0, 0, 0, Bid::new(1.0, 0.5)).unwrap();
    b.insert(1, 0, 0, Bid::new(2.0, 0.5)).unwrap();
    assert!(enumerate_feasible(&b, &sc, 0).unwrap().is_empty());
    let params = AuctionParams::new(1.0, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(matches!(
        exact_select(&b, &sc, 0, params, &mut rng),
        Err(crate::Error::Infeasible(_))
    ));
}

#[test]
fn enumeration_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let (b, sc) = random_instance(&mut rng, 3, 2);
        let mut fast = enumerate_feasible(&b, &sc, 0).unwrap();
        fast.sort();
        assert_eq!(fast, brute_feasible(&b, &sc, 0));
    }
}

#[test]
fn enumeration_cap_is_enforced() {
    let sc = scenario(12, 1, vec![0.0]);
    let mut b = BidProfile::for_scenario(&sc);
    for i in 0..12 {
        b.insert(i, 0, 0, Bid::new(1.0, 0.0)).unwrap();
    }
    let params = AuctionParams::new(1.0, 0.1).unwrap();
    let cfg = ExactConfig {
        cap: 100,
        ..Default::default()
    };
    let m = ExactMechanism::with_config(&b, &sc, params, cfg);
    assert!(matches!(m.feasible(0), Err(crate::Error::TooLarge { limit: 100 })));
}

#[test]
fn delta_examples() {
    let sc = scenario(1, 1, vec![0.0]);
    let mut b = BidProfile::for_scenario(&sc);
    b.insert(0, 0, 0, Bid::new(5.0, 2.0)).unwrap();
    assert_eq!(sensitivity_delta(&b, &sc, 0).unwrap(), 3.0);

    let sc = scenario(2, 1, vec![0.0]);
    let mut b = BidProfile::for_scenario(&sc);
    b.insert(0, 0, 0, Bid::new(2.0, 2.0)).unwrap();
    b.insert(1, 0, 0, Bid::new(1.0, 1.0)).unwrap();
    assert_eq!(sensitivity_delta(&b, &sc, 0).unwrap(), 0.0);
}

#[test]
fn delta_matches_enumeration_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let (b, sc) = random_instance(&mut rng, 3, 2);
        let profiles = brute_feasible(&b, &sc, 0);
        if profiles.is_empty() {
            assert!(sensitivity_delta(&b, &sc, 0).is_err());
            continue;
        }
        let w: Vec<f64> = profiles
            .iter()
            .map(|x| social_welfare(x, &b, &sc).unwrap())
            .collect();
        let hi = w.iter().cloned().fold(f64::MIN, f64::max);
        let lo = w.iter().cloned().fold(f64::MAX, f64::min);
        let d = sensitivity_delta(&b, &sc, 0).unwrap();
        assert!((d - (hi - lo)).abs() < 1e-12);
    }
}

#[test]
fn single_feasible_profile_is_chosen_surely() {
    // demand forces the only bidder in
    let sc = scenario(1, 1, vec![1.0]);
    let mut b = BidProfile::for_scenario(&sc);
    b.insert(0, 0, 0, Bid::new(1.0, 0.3)).unwrap();
    let params = AuctionParams::new(0.5, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let x = exact_select(&b, &sc, 0, params, &mut rng).unwrap();
        assert!(x.get(0, 0, 0));
    }
}

#[test]
fn equal_welfare_profiles_are_equally_likely() {
    let sc = scenario(1, 1, vec![0.0]);
    let mut b = BidProfile::for_scenario(&sc);
    b.insert(0, 0, 0, Bid::new(1.0, 1.0)).unwrap();
    let params = AuctionParams::new(1.0, 0.1).unwrap();
    let d = ExactMechanism::new(&b, &sc, params).distribution(0).unwrap();
    assert_eq!(d.probs, vec![0.5, 0.5]);
}

#[test]
fn two_profile_probabilities() {
    // Ω ∈ {0, 1}, Δ = 1, ε = 2Δ
    let sc = scenario(1, 1, vec![0.0]);
    let mut b = BidProfile::for_scenario(&sc);
    b.insert(0, 0, 0, Bid::new(1.0, 0.0)).unwrap();
    let params = AuctionParams::new(2.0, 0.1).unwrap();
    let d = ExactMechanism::new(&b, &sc, params).distribution(0).unwrap();
    let e = std::f64::consts::E;
    let p_sel = d.selection_probability(0);
    assert!((p_sel - e / (1.0 + e)).abs() < 1e-12);
    assert!((p_sel - 0.7311).abs() < 1e-4);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 20_000;
    let hits = (0..n)
        .filter(|_| exact_select(&b, &sc, 0, params, &mut rng).unwrap().get(0, 0, 0))
        .count();
    let freq = hits as f64 / n as f64;
    assert!((freq - p_sel).abs() < 4.0 * (p_sel * (1.0 - p_sel) / n as f64).sqrt());
}

#[test]
fn single_passenger_payment() {
    let sc = scenario(1, 1, vec![0.0]);
    let mut b = BidProfile::for_scenario(&sc);
    b.insert(0, 0, 0, Bid::new(1.0, 0.0)).unwrap();
    let params = AuctionParams::new(2.0, 0.1).unwrap();
    let r = exact_payment(&b, &sc, 0, 0, params).unwrap();
    let e = std::f64::consts::E;
    let p = e / (1.0 + e);
    let h = -(p * p.ln() + (1.0 - p) * (1.0 - p).ln());
    assert!((h - 0.5822).abs() < 1e-4);
    let expected = p + h - 0.0;
    assert!((r - expected).abs() < 1e-12);
    assert!((r - 1.3133).abs() < 1e-4);
}

/// Direct transcription of the payment rule over brute-force enumerations
/// of both the full profile and the profile without `i`.
fn payment_oracle(b: &BidProfile, sc: &Scenario, i: usize, eps: f64) -> f64 {
    let full = brute_feasible(b, sc, 0);
    let w: Vec<f64> = full.iter().map(|x| social_welfare(x, b, sc).unwrap()).collect();
    let hi = w.iter().cloned().fold(f64::MIN, f64::max);
    let lo = w.iter().cloned().fold(f64::MAX, f64::min);
    let tau = 2.0 * (hi - lo) / eps;
    let z: f64 = w.iter().map(|v| (v / tau).exp()).sum();
    let probs: Vec<f64> = w.iter().map(|v| (v / tau).exp() / z).collect();
    let mut expectation = 0.0;
    let mut h = 0.0;
    for (x, p) in full.iter().zip(&probs) {
        let mut v = 0.0;
        for (j, s, t) in x.selected() {
            let bid = b.get(j, s, t).unwrap();
            v += bid.q;
            if j != i {
                v -= bid.claimed_cost;
            }
        }
        expectation += p * v;
        if *p > 0.0 {
            h -= p * p.ln();
        }
    }
    let others = b.without_passenger(i);
    let rest = brute_feasible(&others, sc, 0);
    let z_rest: f64 = rest
        .iter()
        .map(|x| (social_welfare(x, &others, sc).unwrap() / tau).exp())
        .sum();
    expectation + tau * h - tau * z_rest.ln()
}

#[test]
fn zero_bid_passenger_payment_matches_oracle() {
    let sc = scenario(3, 1, vec![0.0]);
    let mut b = BidProfile::for_scenario(&sc);
    b.insert(0, 0, 0, Bid::new(0.0, 0.0)).unwrap();
    b.insert(1, 0, 0, Bid::new(1.0, 0.2)).unwrap();
    b.insert(2, 0, 0, Bid::new(1.5, 0.4)).unwrap();
    let params = AuctionParams::new(0.7, 0.1).unwrap();
    let r = exact_payment(&b, &sc, 0, 0, params).unwrap();
    let want = payment_oracle(&b, &sc, 0, 0.7);
    assert!((r - want).abs() < 1e-12, "{r} vs {want}");
    // a zero bid doubles every profile, leaving τ ln 2 as the entire transfer
    let tau = 2.0 * sensitivity_delta(&b, &sc, 0).unwrap() / 0.7;
    assert!((r - tau * 2f64.ln()).abs() < 1e-12);
}

#[test]
fn payments_match_oracle_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 20 {
        let (b, sc) = random_instance(&mut rng, 3, 2);
        let m = ExactMechanism::new(&b, &sc, AuctionParams::new(0.9, 0.1).unwrap());
        for i in 0..3 {
            match m.payment(0, i) {
                Ok(r) => {
                    let want = payment_oracle(&b, &sc, i, 0.9);
                    assert!((r - want).abs() < 1e-9 * want.abs().max(1.0));
                    checked += 1;
                }
                Err(crate::Error::UnknownPassenger(_)) | Err(crate::Error::Infeasible(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }
}

#[test]
fn payment_needs_a_bid() {
    let sc = scenario(2, 1, vec![0.0]);
    let mut b = BidProfile::for_scenario(&sc);
    b.insert(1, 0, 0, Bid::new(1.0, 0.2)).unwrap();
    let params = AuctionParams::new(1.0, 0.1).unwrap();
    assert!(matches!(
        exact_payment(&b, &sc, 0, 0, params),
        Err(crate::Error::UnknownPassenger(0))
    ));
    assert!(matches!(
        exact_payment(&b, &sc, 0, 7, params),
        Err(crate::Error::UnknownPassenger(7))
    ));
}

#[test]
fn payments_are_permutation_equivariant() {
    let sc = scenario(3, 1, vec![1.0]);
    let bids = [Bid::new(1.0, 0.2), Bid::new(0.8, 0.1), Bid::new(1.2, 0.9)];
    let perm = [2, 0, 1];
    let mut b = BidProfile::for_scenario(&sc);
    let mut bp = BidProfile::for_scenario(&sc);
    for (i, (&bid, &j)) in bids.iter().zip(&perm).enumerate() {
        b.insert(i, 0, 0, bid).unwrap();
        bp.insert(j, 0, 0, bid).unwrap();
    }
    let params = AuctionParams::new(1.3, 0.1).unwrap();
    for (i, &j) in perm.iter().enumerate() {
        let r = exact_payment(&b, &sc, 0, i, params).unwrap();
        let rp = exact_payment(&bp, &sc, 0, j, params).unwrap();
        assert!((r - rp).abs() < 1e-12);
    }
}

#[test]
fn run_pays_only_winners_and_respects_one_od_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let (b, sc) = random_instance(&mut rng, 3, 2);
        let m = ExactMechanism::new(&b, &sc, AuctionParams::new(1.0, 0.1).unwrap());
        let Ok(out) = m.run(&mut rng) else { continue };
        assert!(check_feasible_at(&out.selection, &b, &sc, 0).unwrap());
        for &(i, s, t) in out.payments.keys() {
            assert!(out.selection.get(i, s, t));
        }
        assert_eq!(out.payments.len(), out.selection.count());
    }
}
