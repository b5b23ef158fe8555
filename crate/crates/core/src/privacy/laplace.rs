use rand::distr::Open01;
use rand::Rng;

use crate::error::{Error, Result};

/// Inverse CDF of the zero-mean Laplace distribution with scale `scale`.
///
/// `u = 0.5` maps to 0 and `u` and `1 - u` map to opposite values.
pub fn laplace_from_uniform(u: f64, scale: f64) -> f64 {
    let d = u - 0.5;
    -scale * d.signum() * (1.0 - 2.0 * d.abs()).ln()
}

/// One Laplace(0, `scale`) draw. A zero scale yields exactly 0.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale >= 0.0) || scale.is_infinite() {
        return Err(Error::InvalidParameter(format!(
            "Laplace scale must be finite and nonnegative, got {scale}"
        )));
    }
    let u: f64 = rng.sample(Open01);
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(laplace_from_uniform(u, scale))
}

/// CDF of Laplace(`mu`, `scale`) at `x`.
pub fn laplace_cdf(x: f64, mu: f64, scale: f64) -> f64 {
    let z = (x - mu) / scale;
    if z < 0.0 {
        0.5 * z.exp()
    } else {
        1.0 - 0.5 * (-z).exp()
    }
}
