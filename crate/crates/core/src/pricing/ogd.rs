use super::{Feedback, UpdateMode};
use crate::error::{Error, Result};

/// Next price for one OD pair, always inside `[0, p_cap]`.
///
/// `Verbatim` subtracts `η Σ C′` over participants. `Subgradient` steps
/// against `g·h - β h·1` with the penalty term active only while demand is
/// unmet.
pub fn ogd_update(
    price: f64,
    fb: &Feedback,
    eta: f64,
    penalty: f64,
    mode: UpdateMode,
    p_cap: f64,
) -> Result<f64> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "learning rate must be nonnegative, got {eta}"
        )));
    }
    let step = match mode {
        UpdateMode::Verbatim => fb.gradient_sum,
        UpdateMode::Subgradient => {
            let pull = if fb.deficit { penalty * fb.slope_sum } else { 0.0 };
            fb.gradient_dot_slope - pull
        }
    };
    Ok((price - eta * step).clamp(0.0, p_cap))
}
