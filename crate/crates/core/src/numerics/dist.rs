use rand::Rng as _;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::{Rng, SimplexVector};
use crate::error::{Error, Result};

/// Uniform draw on `[0, 1)`.
pub fn sample_uniform(rng: &mut Rng) -> f64 {
    rng.random::<f64>()
}

pub fn sample_std_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Log of a `Gamma(shape, 1)` draw.
///
/// Shapes below one use `G(a) = G(a + 1) U^(1/a)` evaluated in log space, so
/// very small shapes (e.g. `gamma * pi_jk` near a simplex corner) do not
/// underflow to zero.
pub fn sample_log_gamma(rng: &mut Rng, shape: f64) -> f64 {
    debug_assert!(shape > 0.0);
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0)
            .expect("positive shape")
            .sample(rng);
        g.ln()
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0)
            .expect("positive shape")
            .sample(rng);
        let u = 1.0 - sample_uniform(rng);
        g.ln() + u.ln() / shape
    }
}

/// Dirichlet draw by the gamma-ratio construction.
///
/// Entries are floored at the smallest positive normal `f64`, so the result
/// is strictly positive and its logarithm is always finite.
pub fn sample_dirichlet(rng: &mut Rng, params: &[f64]) -> Result<SimplexVector> {
    if params.is_empty() {
        return Err(Error::domain("dirichlet needs at least one parameter"));
    }
    if let Some(bad) = params.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::domain(format!(
            "dirichlet parameters must be positive, got {bad}"
        )));
    }
    if params.len() == 1 {
        return Ok(SimplexVector::vertex(1, 0));
    }
    let logs: Vec<f64> = params.iter().map(|&a| sample_log_gamma(rng, a)).collect();
    let lse = super::log_sum_exp(&logs);
    let values = logs
        .iter()
        .map(|l| (l - lse).exp().max(f64::MIN_POSITIVE))
        .collect();
    SimplexVector::new(values)
}

/// Index `k` with probability `weights[k] / sum(weights)`.
pub fn sample_categorical(rng: &mut Rng, weights: &[f64]) -> Result<usize> {
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::domain("categorical weights must be finite and >= 0"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::domain("categorical weights are all zero"));
    }
    Ok(draw_from_weights(rng, weights, total))
}

/// Unchecked inverse-CDF draw for hot loops; `total` must equal the sum of
/// the (non-negative) `weights`.
#[inline]
pub fn draw_from_weights(rng: &mut Rng, weights: &[f64], total: f64) -> usize {
    let target = sample_uniform(rng) * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = k;
            if target < acc {
                return k;
            }
        }
    }
    last_positive
}
