//! Special functions, simplex distributions and seeded randomness shared by
//! every inference backend.

mod dist;
mod rng;
mod simplex;
mod special;

pub use dist::{
    draw_from_weights, sample_categorical, sample_dirichlet, sample_log_gamma, sample_std_normal,
    sample_uniform,
};
pub use rng::{Rng, RngState};
pub use simplex::SimplexVector;
pub use special::{
    digamma, digamma_checked, ln_gamma, tetragamma, tetragamma_checked, trigamma,
    trigamma_checked,
};

/// `ln(sum(exp(xs)))` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// L1 distance between two equal-length vectors.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
