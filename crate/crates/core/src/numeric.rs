//! Small numerical helpers shared by the mechanisms.

/// `ln Σ exp(x)` computed with max subtraction. Returns `-inf` for an empty
/// slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalized probabilities from log-weights.
pub fn softmax(log_weights: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(log_weights);
    log_weights.iter().map(|w| (w - lse).exp()).collect()
}

/// `tau · ln Σ exp(x / tau)`, which tends to `max x` as `tau → 0`.
pub fn soft_max(xs: &[f64], tau: f64) -> f64 {
    if tau == 0.0 {
        return xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    let scaled: Vec<f64> = xs.iter().map(|x| x / tau).collect();
    tau * log_sum_exp(&scaled)
}

/// Shannon entropy in nats. Zero-probability entries contribute nothing.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Draws an index from log-weights by inverse CDF on a single uniform.
pub fn sample_index(log_weights: &[f64], u: f64) -> usize {
    let probs = softmax(log_weights);
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Rounding can leave `acc` a hair below one; fall back to the last
    // entry with positive mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_is_stable() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn soft_max_limits() {
        assert_eq!(soft_max(&[1.0, 3.0, 2.0], 0.0), 3.0);
        let v = soft_max(&[0.0, 0.0], 1.0);
        assert!((v - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn entropy_of_fair_coin() {
        assert!((entropy(&[0.5, 0.5]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
    }

    #[test]
    fn sample_index_respects_cdf() {
        let lw = [0.0, 0.0];
        assert_eq!(sample_index(&lw, 0.25), 0);
        assert_eq!(sample_index(&lw, 0.75), 1);
        assert_eq!(sample_index(&[0.0, f64::NEG_INFINITY], 0.999_999_999_999), 0);
    }
}
