//! Log-gamma and polygamma functions of orders 0..2.
//!
//! Each function shifts its argument upward with the recurrence
//! `f(x) = f(x + 1) - (d/dx)^n (1/x)` until `x >= SHIFT`, then evaluates an
//! asymptotic Bernoulli series that is accurate to machine precision there.

use crate::error::{Error, Result};

const SHIFT: f64 = 10.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

// B_2k / (2k (2k - 1)), k = 1..7
const LN_GAMMA_SERIES: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
];

// B_2k / 2k, k = 1..7
const DIGAMMA_SERIES: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32_760.0,
    1.0 / 12.0,
];

// B_2k, k = 1..7
const TRIGAMMA_SERIES: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

// (2k + 1) B_2k, k = 1..7
const TETRAGAMMA_SERIES: [f64; 7] = [
    0.5,
    -1.0 / 6.0,
    1.0 / 6.0,
    -3.0 / 10.0,
    5.0 / 6.0,
    -691.0 / 210.0,
    35.0 / 2.0,
];

/// `ln Γ(x)` for `x > 0`. Returns NaN outside the domain.
pub fn ln_gamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let mut x = x;
    let mut prod = 1.0;
    while x < SHIFT {
        prod *= x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv;
    for c in LN_GAMMA_SERIES {
        series += c * pow;
        pow *= inv2;
    }
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series - prod.ln()
}

/// Digamma `Ψ(x) = d/dx ln Γ(x)`. Returns NaN for `x <= 0`.
pub fn digamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < SHIFT {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let mut series = 0.0;
    let mut pow = inv2;
    for c in DIGAMMA_SERIES {
        series += c * pow;
        pow *= inv2;
    }
    acc + x.ln() - 0.5 / x - series
}

/// Trigamma `Ψ'(x)`. Returns NaN for `x <= 0`.
pub fn trigamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < SHIFT {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv2 * inv;
    for c in TRIGAMMA_SERIES {
        series += c * pow;
        pow *= inv2;
    }
    acc + inv + 0.5 * inv2 + series
}

/// Tetragamma `Ψ''(x)`. Returns NaN for `x <= 0`.
pub fn tetragamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < SHIFT {
        acc -= 2.0 / (x * x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv2 * inv2;
    for c in TETRAGAMMA_SERIES {
        series += c * pow;
        pow *= inv2;
    }
    acc - inv2 - inv2 * inv - series
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} requires x > 0, got {x}")))
    }
}

pub fn digamma_checked(x: f64) -> Result<f64> {
    check_positive("digamma", x)?;
    Ok(digamma(x))
}

pub fn trigamma_checked(x: f64) -> Result<f64> {
    check_positive("trigamma", x)?;
    Ok(trigamma(x))
}

pub fn tetragamma_checked(x: f64) -> Result<f64> {
    check_positive("tetragamma", x)?;
    Ok(tetragamma(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    /// Ψ(x) = -γ + Σ_{n>=0} (x - 1) / ((n + 1)(n + x)), summed directly with
    /// an Euler-Maclaurin tail correction.
    fn digamma_series(x: f64) -> f64 {
        let n_terms = 2_000_000usize;
        let mut sum = 0.0;
        for n in (0..n_terms).rev() {
            let n = n as f64;
            sum += (x - 1.0) / ((n + 1.0) * (n + x));
        }
        let big_n = n_terms as f64;
        // integral of the summand from N to infinity plus half the first omitted term
        let tail = ((big_n + x) / (big_n + 1.0)).ln()
            + 0.5 * (x - 1.0) / ((big_n + 1.0) * (big_n + x));
        -EULER_GAMMA + sum + tail
    }

    fn log_grid() -> Vec<f64> {
        (0..=120)
            .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 120.0))
            .collect()
    }

    #[test]
    fn digamma_reference_values() {
        assert!((digamma(1.0) + EULER_GAMMA).abs() < 1e-12);
        assert!((digamma(1.0) - digamma_series(1.0)).abs() < 1e-10);
        let half = -EULER_GAMMA - 2.0 * std::f64::consts::LN_2;
        assert!((digamma(0.5) - half).abs() < 1e-12);
        assert!((digamma(0.5) - digamma_series(0.5)).abs() < 1e-10);
        assert!((digamma(3.7) - digamma_series(3.7)).abs() < 1e-10);
        assert!((digamma(2.0) - digamma(1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn digamma_small_arguments() {
        // Ψ(x) ≈ -1/x - γ + (π²/6) x for tiny x
        let x = 1e-6;
        let approx = -1.0 / x - EULER_GAMMA + std::f64::consts::PI.powi(2) / 6.0 * x;
        assert!((digamma(x) - approx).abs() < 1e-9);
    }

    #[test]
    fn trigamma_reference_values() {
        let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((trigamma(1.0) - zeta2).abs() / zeta2 < 1e-12);
        let h = 1e-5;
        for &x in &[0.3, 1.0, 2.5, 17.0] {
            let fd = (digamma(x + h) - digamma(x - h)) / (2.0 * h);
            assert!((fd - trigamma(x)).abs() / trigamma(x) < 1e-8, "x = {x}");
        }
        assert!((trigamma(4.0) - trigamma(3.0) + 1.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn tetragamma_reference_values() {
        let expected = -2.404_113_806_319_188_5;
        assert!((tetragamma(1.0) - expected).abs() / expected.abs() < 1e-12);
        let h = 1e-5;
        let fd = (trigamma(1.0 + h) - trigamma(1.0 - h)) / (2.0 * h);
        assert!((fd - expected).abs() / expected.abs() < 1e-8);
        for &x in &[0.2, 3.0, 40.0] {
            let fd = (trigamma(x + h) - trigamma(x - h)) / (2.0 * h);
            assert!((fd - tetragamma(x)).abs() / tetragamma(x).abs() < 1e-7, "x = {x}");
        }
    }

    #[test]
    fn recurrences_hold_on_log_grid() {
        for x in log_grid() {
            let d = digamma(x + 1.0) - digamma(x) - 1.0 / x;
            assert!(d.abs() <= 1e-9 * (1.0 + 1.0 / x), "digamma at {x}: {d}");
            let t = trigamma(x + 1.0) - trigamma(x) + 1.0 / (x * x);
            assert!(t.abs() <= 1e-9 * (1.0 + 1.0 / (x * x)), "trigamma at {x}: {t}");
            let q = tetragamma(x + 1.0) - tetragamma(x) - 2.0 / (x * x * x);
            assert!(q.abs() <= 1e-9 * (1.0 + 2.0 / (x * x * x)), "tetragamma at {x}: {q}");
            let g = ln_gamma(x + 1.0) - ln_gamma(x) - x.ln();
            assert!(g.abs() <= 1e-9 * (1.0 + x.ln().abs()), "ln_gamma at {x}: {g}");
        }
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        let sqrt_pi_ln = 0.5 * std::f64::consts::PI.ln();
        assert!((ln_gamma(0.5) - sqrt_pi_ln).abs() < 1e-14);
        // ln(10!) = ln Γ(11)
        let ln_fact10 = (1..=10).map(|i| (i as f64).ln()).sum::<f64>();
        assert!((ln_gamma(11.0) - ln_fact10).abs() < 1e-12);
        assert!((ln_gamma(1e-300) - 300.0 * std::f64::consts::LN_10).abs() < 1e-9);
    }

    #[test]
    fn domain_errors() {
        assert!(digamma_checked(0.0).is_err());
        assert!(trigamma_checked(-1.0).is_err());
        assert!(tetragamma_checked(f64::NAN).is_err());
        assert!(digamma(0.0).is_nan());
        assert!(digamma_checked(1e-6).is_ok());
    }
}
