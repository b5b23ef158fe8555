use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::cost::CostFunction;
use super::scenario::Passenger;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CostFamily {
    #[default]
    Linear,
    /// `C(q) = (w·f)/2 · q²`, so the marginal cost is `(w·f) q`.
    Quadratic,
}

/// Parameters of the synthetic passenger population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub weight_mean: [f64; 4],
    /// Factor weights are drawn with covariance `weight_cov_scale · I`.
    pub weight_cov_scale: f64,
    pub factor_rates: [f64; 4],
    pub capacity_mean: f64,
    pub capacity_var: f64,
    pub seed: u64,
    #[serde(default)]
    pub family: CostFamily,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            n: 500,
            weight_mean: [0.16, 0.27, 0.36, 0.21],
            weight_cov_scale: 0.3,
            factor_rates: [0.5; 4],
            capacity_mean: 3.5,
            capacity_var: 0.3,
            seed: 1,
            family: CostFamily::Linear,
        }
    }
}

/// Draws `spec.n` passengers. Factor weights and capacities are normal
/// draws clamped at zero; each passenger gets a home OD pair drawn
/// uniformly and stays local to it for the whole horizon.
pub fn sample_population(
    spec: &PopulationSpec,
    num_od: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<Passenger>> {
    if !(spec.weight_cov_scale >= 0.0 && spec.weight_cov_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "weight covariance scale {} is not positive semidefinite",
            spec.weight_cov_scale
        )));
    }
    if !(spec.capacity_var >= 0.0 && spec.capacity_var.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "capacity variance {} must be nonnegative",
            spec.capacity_var
        )));
    }
    if spec.n > 0 && num_od == 0 {
        return Err(Error::InvalidParameter("population needs at least one OD pair".into()));
    }
    let normal = |mean: f64, var: f64| {
        Normal::new(mean, var.sqrt())
            .map_err(|e| Error::InvalidParameter(format!("normal({mean}, {var}): {e}")))
    };
    let weight_dists = spec
        .weight_mean
        .iter()
        .map(|&m| normal(m, spec.weight_cov_scale))
        .collect::<Result<Vec<_>>>()?;
    let capacity_dist = normal(spec.capacity_mean, spec.capacity_var)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(spec.n);
    for id in 0..spec.n {
        let mut weights = [0.0; 4];
        for (w, d) in weights.iter_mut().zip(&weight_dists) {
            *w = d.sample(&mut rng).max(0.0);
        }
        let capacity = capacity_dist.sample(&mut rng).max(0.0);
        let home = rng.random_range(0..num_od);
        let cost = match spec.family {
            CostFamily::Linear => CostFunction::Linear {
                weights,
                rates: spec.factor_rates,
            },
            CostFamily::Quadratic => {
                let slope: f64 = weights.iter().zip(&spec.factor_rates).map(|(w, f)| w * f).sum();
                // a must stay positive for the quadratic family
                CostFunction::Quadratic {
                    a: (slope / 2.0).max(1e-6),
                    b: 0.0,
                }
            }
        };
        out.push(Passenger {
            id: id as u32,
            capacity,
            cost,
            local_od: vec![home; horizon],
        });
    }
    Ok(out)
}
