//! Super-increasing integer systems and greedy digit extraction.
//!
//! A sequence `β_1 < β_2 < ...` with per-index coefficient bounds `b_i` is
//! super-increasing when `β_m > 2 Σ_{i<m} b_i β_i` for every `m`. Then every
//! integer has at most one representation `Σ n_i β_i` with `|n_i| <= b_i`,
//! and rounding `x / β_m` from the top index down recovers it.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuperIncreasing {
    betas: Vec<BigInt>,
    bounds: Vec<BigInt>,
}

/// Sparse digit vector: `(index, digit)` pairs with nonzero digits, ascending.
pub type Digits = Vec<(usize, BigInt)>;

impl SuperIncreasing {
    /// Wraps an explicit sequence, rejecting it unless it is super-increasing.
    pub fn new(betas: Vec<BigInt>, bounds: Vec<BigInt>) -> Result<Self> {
        if betas.len() != bounds.len() {
            return Err(Error::arg("betas and bounds differ in length"));
        }
        if betas.iter().any(|b| !b.is_positive()) || bounds.iter().any(|b| b.is_negative()) {
            return Err(Error::arg("betas must be positive and bounds nonnegative"));
        }
        let s = SuperIncreasing { betas, bounds };
        if !s.certify() {
            return Err(Error::arg("sequence is not super-increasing"));
        }
        Ok(s)
    }

    /// `β_1 = 1`, `β_{j+1} = 2 W_j + 1` with `W_j = Σ_{i<=j} b_i β_i`: the
    /// smallest sequence that is super-increasing for the given bounds.
    pub fn tight(bounds: &[u64]) -> Self {
        let mut betas = Vec::with_capacity(bounds.len());
        let mut weight = BigInt::zero();
        for &b in bounds {
            let beta = if betas.is_empty() {
                BigInt::one()
            } else {
                &weight * 2u32 + 1u32
            };
            weight += &beta * b;
            betas.push(beta);
        }
        SuperIncreasing {
            betas,
            bounds: bounds.iter().map(|&b| BigInt::from(b)).collect(),
        }
    }

    /// `β_1 = 1`, `β_{i+1} = q_{i+1} (1 + Σ_{t<=i} b_t β_t)` where
    /// `q_i = 2 b_i + 1`.
    pub fn scaled(bounds: &[BigInt]) -> Self {
        let mut betas = Vec::with_capacity(bounds.len());
        let mut weight = BigInt::zero();
        for b in bounds {
            let beta = if betas.is_empty() {
                BigInt::one()
            } else {
                (b * 2u32 + 1u32) * (&weight + 1u32)
            };
            weight += &beta * b;
            betas.push(beta);
        }
        SuperIncreasing {
            betas,
            bounds: bounds.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn betas(&self) -> &[BigInt] {
        &self.betas
    }

    pub fn bounds(&self) -> &[BigInt] {
        &self.bounds
    }

    /// Checks `β_m > 2 Σ_{i<m} b_i β_i` for every `m`.
    pub fn certify(&self) -> bool {
        let mut weight = BigInt::zero();
        for (beta, b) in self.betas.iter().zip(&self.bounds) {
            if *beta <= &weight * 2u32 {
                return false;
            }
            weight += beta * b;
        }
        true
    }

    /// Checks super-increase for a sub-range of indices with alternative
    /// bounds, i.e. that all combinations `Σ m_i β_i` over `range` with
    /// `|m_i| <= bounds[i]` are distinct.
    pub fn certify_range(&self, range: std::ops::Range<usize>, bound: &BigInt) -> bool {
        let mut weight = BigInt::zero();
        for beta in &self.betas[range] {
            if *beta <= &weight * 2u32 {
                return false;
            }
            weight += beta * bound;
        }
        true
    }

    /// The unique bounded representation of `x`, if it has one.
    pub fn decompose(&self, x: &BigInt) -> Option<Digits> {
        let mut rest = x.clone();
        let mut digits = Vec::new();
        for m in (0..self.betas.len()).rev() {
            if rest.is_zero() {
                break;
            }
            let beta = &self.betas[m];
            let twice = rest.abs() * 2u32;
            if twice < *beta {
                continue;
            }
            // round-half-up of rest / beta
            let n = (&rest * 2u32 + beta).div_floor(&(beta * 2u32));
            if n.abs() > self.bounds[m] {
                return None;
            }
            rest -= &n * beta;
            if !n.is_zero() {
                digits.push((m, n));
            }
        }
        if rest.is_zero() {
            digits.reverse();
            Some(digits)
        } else {
            None
        }
    }

    /// `Σ n_i β_i` for a sparse digit vector.
    pub fn evaluate(&self, digits: &[(usize, BigInt)]) -> BigInt {
        digits.iter().map(|(i, n)| n * &self.betas[*i]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tight_rule_values() {
        let s = SuperIncreasing::tight(&[1, 3, 3]);
        // beta_2 = 2*1 + 1, beta_3 = 2*(1 + 3*3) + 1
        assert_eq!(s.betas(), &[BigInt::from(1), BigInt::from(3), BigInt::from(21)]);
        assert!(s.certify());
    }

    #[test]
    fn scaled_rule_values() {
        let s = SuperIncreasing::scaled(&[BigInt::from(1), BigInt::from(2)]);
        // beta_2 = 5 * (1 + 1*1)
        assert_eq!(s.betas()[1], BigInt::from(10));
        assert!(s.certify());
    }

    #[test]
    fn rejects_non_increasing() {
        assert!(SuperIncreasing::new(vec![1.into(), 2.into()], vec![1.into(), 1.into()]).is_err());
        assert!(SuperIncreasing::new(vec![1.into(), 3.into()], vec![1.into(), 1.into()]).is_ok());
    }

    #[test]
    fn out_of_range_values_have_no_digits() {
        let s = SuperIncreasing::tight(&[1, 1, 1]);
        // betas 1, 3, 9: representable range is [-13, 13]
        assert!(s.decompose(&BigInt::from(13)).is_some());
        assert!(s.decompose(&BigInt::from(14)).is_none());
        assert!(s.decompose(&BigInt::from(-14)).is_none());
    }

    proptest! {
        #[test]
        fn decompose_inverts_bounded_combinations(
            bounds in prop::collection::vec(1u64..6, 1..8),
            raw in prop::collection::vec(-6i64..=6, 8),
        ) {
            let s = SuperIncreasing::tight(&bounds);
            let digits: Digits = bounds
                .iter()
                .zip(&raw)
                .enumerate()
                .map(|(i, (&b, &r))| (i, BigInt::from(r.clamp(-(b as i64), b as i64))))
                .filter(|(_, n)| !n.is_zero())
                .collect();
            let x = s.evaluate(&digits);
            prop_assert_eq!(s.decompose(&x), Some(digits));
        }
    }
}
