use crate::error::{Error, Result};
use crate::model::{sample_population, Bid, CostFunction, Passenger, PopulationSpec, Scenario};
use crate::privacy::{BidSpace, CostSpace};

use super::traffic::TrafficVolumeTable;

/// Scenario built from a volume table together with the baseline volumes
/// and the road label of each OD pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficScenario {
    pub scenario: Scenario,
    /// `before[s][t]` vehicles on the road without any offload.
    pub before: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

/// Turns every road into an OD pair and every index into a time step with
/// demand `fraction × volume`, then samples the population.
pub fn build_scenario(
    table: &TrafficVolumeTable,
    population: &PopulationSpec,
    fraction: f64,
    penalty: f64,
) -> Result<TrafficScenario> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!("offload fraction {fraction} outside [0, 1]")));
    }
    if table.is_empty() {
        return Err(Error::InvalidParameter("traffic table is empty".into()));
    }
    let before = table.volume_matrix()?;
    let labels = table.roads().into_iter().map(|(c, d)| format!("{c} {d}")).collect();
    let demand = before
        .iter()
        .map(|row| row.iter().map(|v| fraction * v).collect())
        .collect();
    let (ods, horizon) = (before.len(), before[0].len());
    let pop = sample_population(population, ods, horizon, population.seed)?;
    let scenario = Scenario::new(demand, vec![penalty; ods], pop)?;
    Ok(TrafficScenario {
        scenario,
        before,
        labels,
    })
}

/// Two passengers with unit capacity competing for a unit demand, each
/// claiming one of two cost levels.
pub fn two_way_leakage_instance() -> (Scenario, BidSpace) {
    let pop = (0..2)
        .map(|id| Passenger {
            id,
            capacity: 1.0,
            cost: CostFunction::linear_rate(0.5),
            local_od: vec![0],
        })
        .collect();
    let sc = Scenario::new(vec![vec![1.0]], vec![1.0], pop).expect("static instance is valid");
    let menu = vec![(0, Bid::new(1.0, 0.2)), (0, Bid::new(1.0, 0.8))];
    (sc, BidSpace { t: 0, options: vec![menu.clone(), menu] })
}

/// Two passengers on one road, each with one of two quadratic costs, over
/// `horizon` steps of unattainable demand.
pub fn one_way_leakage_instance(horizon: usize) -> (Scenario, CostSpace) {
    let low = CostFunction::quadratic(0.5, 0.0).expect("valid cost");
    let high = CostFunction::quadratic(1.0, 0.2).expect("valid cost");
    let pop = (0..2)
        .map(|id| Passenger {
            id,
            capacity: 10.0,
            cost: low.clone(),
            local_od: vec![0; horizon],
        })
        .collect();
    let sc = Scenario::new(vec![vec![100.0; horizon]], vec![2.0], pop).expect("static instance is valid");
    let menu = vec![low, high];
    (sc, CostSpace { options: vec![menu.clone(), menu] })
}
