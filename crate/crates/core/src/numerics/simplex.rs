use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point on the probability simplex: non-negative entries summing to one.
///
/// Construction renormalizes, so the sum is 1 up to rounding (|sum - 1| < 1e-12).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("simplex vector must have dimension >= 1"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain(
                "simplex entries must be finite and non-negative",
            ));
        }
        let total: f64 = values.iter().sum();
        if !(total > 0.0) {
            return Err(Error::domain("simplex entries sum to zero"));
        }
        let mut values = values;
        values.iter_mut().for_each(|v| *v /= total);
        Ok(Self(values))
    }

    pub fn uniform(dim: usize) -> Self {
        assert!(dim > 0);
        Self(vec![1.0 / dim as f64; dim])
    }

    /// Unit vector on coordinate `k`.
    pub fn vertex(dim: usize, k: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Reorders the coordinates so that entry `i` of the result is entry
    /// `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self(perm.iter().map(|&p| self.0[p]).collect())
    }
}

impl Deref for SimplexVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for SimplexVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        SimplexVector::new(v)
    }
}

impl From<SimplexVector> for Vec<f64> {
    fn from(v: SimplexVector) -> Vec<f64> {
        v.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renormalizes() {
        let s = SimplexVector::new(vec![1.0, 3.0]).unwrap();
        assert_eq!(s.as_slice(), &[0.25, 0.75]);
    }

    #[test]
    fn rejects_invalid() {
        assert!(SimplexVector::new(vec![]).is_err());
        assert!(SimplexVector::new(vec![0.0, 0.0]).is_err());
        assert!(SimplexVector::new(vec![-1.0, 2.0]).is_err());
        assert!(SimplexVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn permutation() {
        let s = SimplexVector::new(vec![0.1, 0.2, 0.7]).unwrap();
        assert_eq!(s.permuted(&[2, 0, 1]).as_slice(), &[0.7, 0.1, 0.2]);
    }
}
