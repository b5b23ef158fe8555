use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A passenger's inconvenience cost of providing `q` units of offload.
///
/// Both families satisfy `C(0) = 0` and are nondecreasing and convex on
/// `q >= 0`. The linear family is a weighted combination of four factors
/// (comfort, reliability, delay, fare), each with its own rate per unit of
/// offload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "lowercase")]
pub enum CostFunction {
    Linear { weights: [f64; 4], rates: [f64; 4] },
    Quadratic { a: f64, b: f64 },
}

impl CostFunction {
    /// Linear cost with a single slope `c`.
    pub fn linear_rate(c: f64) -> Self {
        CostFunction::Linear {
            weights: [c, 0.0, 0.0, 0.0],
            rates: [1.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn quadratic(a: f64, b: f64) -> Result<Self> {
        let c = CostFunction::Quadratic { a, b };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CostFunction::Linear { .. } => {
                let c = self.slope_linear();
                if !(c.is_finite() && c >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "linear cost slope must be finite and nonnegative, got {c}"
                    )));
                }
            }
            CostFunction::Quadratic { a, b } => {
                if !(a.is_finite() && a > 0.0 && b.is_finite() && b >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "quadratic cost needs a > 0 and b >= 0, got a = {a}, b = {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn slope_linear(&self) -> f64 {
        match self {
            CostFunction::Linear { weights, rates } => {
                weights.iter().zip(rates).map(|(w, f)| w * f).sum()
            }
            CostFunction::Quadratic { .. } => f64::NAN,
        }
    }

    /// The constant marginal cost of a linear cost function.
    pub fn linear_slope(&self) -> Option<f64> {
        match self {
            CostFunction::Linear { .. } => Some(self.slope_linear()),
            CostFunction::Quadratic { .. } => None,
        }
    }

    pub fn eval(&self, q: f64) -> Result<f64> {
        check_offload(q)?;
        Ok(match *self {
            CostFunction::Linear { .. } => {
                if q == 0.0 {
                    0.0
                } else {
                    self.slope_linear() * q
                }
            }
            CostFunction::Quadratic { a, b } => a * q * q + b * q,
        })
    }

    pub fn gradient(&self, q: f64) -> Result<f64> {
        check_offload(q)?;
        Ok(match *self {
            CostFunction::Linear { .. } => self.slope_linear(),
            CostFunction::Quadratic { a, b } => 2.0 * a * q + b,
        })
    }

    /// Lipschitz constant of the gradient (zero for the linear family).
    pub fn gradient_lipschitz(&self) -> f64 {
        match *self {
            CostFunction::Linear { .. } => 0.0,
            CostFunction::Quadratic { a, .. } => 2.0 * a,
        }
    }
}

fn check_offload(q: f64) -> Result<()> {
    if q >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeOffload(q))
    }
}
