use serde::{Deserialize, Serialize};

use super::cost::CostFunction;
use crate::error::{Error, Result};

/// A passenger who may switch one trip per hour to public transit.
///
/// At each time step the passenger is physically near exactly one OD pair
/// (`local_od[t]`); every other OD pair is out of reach, which is modelled
/// by the absence of a cost function rather than an infinite value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passenger {
    pub id: u32,
    /// Maximum offload the passenger can provide in one step.
    pub capacity: f64,
    pub cost: CostFunction,
    pub local_od: Vec<usize>,
}

impl Passenger {
    /// The cost function for OD pair `od` at time `t`, if the passenger is
    /// local to it.
    pub fn cost_for(&self, od: usize, t: usize) -> Option<&CostFunction> {
        match self.local_od.get(t) {
            Some(&s) if s == od => Some(&self.cost),
            _ => None,
        }
    }

    pub fn local_at(&self, t: usize) -> Option<usize> {
        self.local_od.get(t).copied()
    }
}

/// Demand schedule, deficit penalties and population for one planning
/// horizon. The unit conversion between offload and dollars is fixed at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(rename = "S")]
    num_od: usize,
    #[serde(rename = "T")]
    horizon: usize,
    /// `demand[s][t]` offload units required.
    demand: Vec<Vec<f64>>,
    beta: Vec<f64>,
    population: Vec<Passenger>,
}

impl Scenario {
    pub fn new(
        demand: Vec<Vec<f64>>,
        beta: Vec<f64>,
        population: Vec<Passenger>,
    ) -> Result<Self> {
        let num_od = demand.len();
        let horizon = demand.first().map_or(0, Vec::len);
        let sc = Scenario {
            num_od,
            horizon,
            demand,
            beta,
            population,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn validate(&self) -> Result<()> {
        if self.num_od == 0 {
            return Err(Error::InvalidParameter("scenario needs at least one OD pair".into()));
        }
        if self.demand.len() != self.num_od || self.beta.len() != self.num_od {
            return Err(Error::ShapeMismatch(format!(
                "expected {} demand rows and penalties, got {} and {}",
                self.num_od,
                self.demand.len(),
                self.beta.len()
            )));
        }
        for (s, row) in self.demand.iter().enumerate() {
            if row.len() != self.horizon {
                return Err(Error::ShapeMismatch(format!(
                    "demand row {s} has {} entries, expected {}",
                    row.len(),
                    self.horizon
                )));
            }
            if let Some(q) = row.iter().find(|q| !(q.is_finite() && **q >= 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "demand must be nonnegative, got {q} for OD {s}"
                )));
            }
        }
        if let Some(b) = self.beta.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(Error::InvalidParameter(format!("penalty must be nonnegative, got {b}")));
        }
        if self.population.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        for p in &self.population {
            p.cost.validate()?;
            if !(p.capacity.is_finite() && p.capacity >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "passenger {} has invalid capacity {}",
                    p.id, p.capacity
                )));
            }
            if p.local_od.len() != self.horizon {
                return Err(Error::ShapeMismatch(format!(
                    "passenger {} has {} locality entries, expected {}",
                    p.id,
                    p.local_od.len(),
                    self.horizon
                )));
            }
            if let Some(s) = p.local_od.iter().find(|&&s| s >= self.num_od) {
                return Err(Error::ShapeMismatch(format!(
                    "passenger {} is local to OD {s}, which does not exist",
                    p.id
                )));
            }
        }
        Ok(())
    }

    pub fn num_od(&self) -> usize {
        self.num_od
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn demand(&self, s: usize, t: usize) -> f64 {
        self.demand[s][t]
    }

    pub fn demand_matrix(&self) -> &[Vec<f64>] {
        &self.demand
    }

    pub fn penalty(&self, s: usize) -> f64 {
        self.beta[s]
    }

    pub fn population(&self) -> &[Passenger] {
        &self.population
    }

    pub fn num_passengers(&self) -> usize {
        self.population.len()
    }

    /// Indices of the passengers local to OD `s` at time `t`.
    pub fn local_passengers(&self, s: usize, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.population
            .iter()
            .enumerate()
            .filter(move |(_, p)| p.local_at(t) == Some(s))
            .map(|(i, _)| i)
    }

    /// Copy of this scenario with a different demand schedule.
    pub fn with_demand(&self, demand: Vec<Vec<f64>>) -> Result<Self> {
        Scenario::new(demand, self.beta.clone(), self.population.clone())
    }

    /// Copy of this scenario with a different population.
    pub fn with_population(&self, population: Vec<Passenger>) -> Result<Self> {
        Scenario::new(self.demand.clone(), self.beta.clone(), population)
    }
}
