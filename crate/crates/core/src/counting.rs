//! Exact counts over finite fields.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Number of `k`-dimensional subspaces of (F_q)^n:
/// Π_{i<k} (q^{n-i} - 1) / (q^{i+1} - 1).
pub fn gaussian_binomial(n: usize, k: usize, q: u32) -> Result<BigUint> {
    if k > n {
        return Err(Error::OutOfRange(format!("k={k} exceeds n={n}")));
    }
    let q = BigUint::from(q);
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..k {
        num *= q.pow((n - i) as u32) - 1u32;
        den *= q.pow((i + 1) as u32) - 1u32;
    }
    debug_assert!((&num % &den).is_zero());
    Ok(num / den)
}

/// log2 of a big integer, accurate to f64 precision at any size.
pub fn log2_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    let shift = bits.saturating_sub(64);
    let top = (x >> shift).to_f64().expect("64-bit value converts");
    top.log2() + shift as f64
}

pub fn log_q_big(x: &BigUint, q: u32) -> f64 {
    log2_big(x) / (q as f64).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values() {
        assert_eq!(gaussian_binomial(5, 0, 2).unwrap(), BigUint::one());
        assert_eq!(gaussian_binomial(2, 1, 2).unwrap(), BigUint::from(3u32));
        assert_eq!(gaussian_binomial(4, 2, 2).unwrap(), BigUint::from(35u32));
        assert_eq!(gaussian_binomial(8, 4, 2).unwrap(), BigUint::from(200787u32));
        assert_eq!(gaussian_binomial(3, 1, 3).unwrap(), BigUint::from(13u32));
        assert!(gaussian_binomial(2, 3, 2).is_err());
    }

    #[test]
    fn symmetry() {
        for n in 0..10 {
            for k in 0..=n {
                assert_eq!(gaussian_binomial(n, k, 3).unwrap(), gaussian_binomial(n, n - k, 3).unwrap());
            }
        }
    }

    #[test]
    fn log2_of_large_values() {
        let x = BigUint::one() << 5000usize;
        assert!((log2_big(&x) - 5000.0).abs() < 1e-9);
        assert!((log2_big(&BigUint::from(9u32)) - 9f64.log2()).abs() < 1e-12);
    }
}
