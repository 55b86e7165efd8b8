//! Prime-field arithmetic.
//!
//! Elements are stored as `u16` (every prime below 2^16 fits); products are
//! formed in `u32` and reduced once.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A field element. Always reduced, i.e. `< q`.
pub type Elem = u16;

/// The prime field F_q.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct FieldSpec {
    q: u32,
}

impl FieldSpec {
    /// Largest admissible modulus.
    pub const MAX_Q: u32 = 1 << 16;

    pub fn new(q: u32) -> Result<Self> {
        if !(2..=Self::MAX_Q).contains(&q) || !is_prime(q) {
            return Err(Error::InvalidField(q as u64));
        }
        Ok(FieldSpec { q })
    }

    pub fn binary() -> Self {
        FieldSpec { q: 2 }
    }

    #[inline]
    pub fn q(&self) -> u32 {
        self.q
    }

    #[inline]
    pub fn is_binary(&self) -> bool {
        self.q == 2
    }

    /// Reduces an arbitrary integer into the field.
    #[inline]
    pub fn elem(&self, v: u64) -> Elem {
        (v % self.q as u64) as Elem
    }

    /// Checks that `v` is already a canonical representative.
    pub fn check(&self, v: u64) -> Result<Elem> {
        if v < self.q as u64 {
            Ok(v as Elem)
        } else {
            Err(Error::EntryOutOfRange { value: v, q: self.q })
        }
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        let s = a as u32 + b as u32;
        (if s >= self.q { s - self.q } else { s }) as Elem
    }

    #[inline]
    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        let (a, b) = (a as u32, b as u32);
        (if a >= b { a - b } else { a + self.q - b }) as Elem
    }

    #[inline]
    pub fn neg(&self, a: Elem) -> Elem {
        if a == 0 {
            0
        } else {
            (self.q - a as u32) as Elem
        }
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        ((a as u32 * b as u32) % self.q) as Elem
    }

    pub fn pow(&self, mut base: Elem, mut exp: u64) -> Elem {
        let mut acc: Elem = 1 % self.q as Elem;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat; `None` for zero.
    pub fn inv(&self, a: Elem) -> Option<Elem> {
        if a == 0 {
            None
        } else {
            Some(self.pow(a, self.q as u64 - 2))
        }
    }

    #[inline]
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Elem {
        rng.random_range(0..self.q) as Elem
    }

    /// `dst += factor * src`, entry-wise.
    #[inline]
    pub fn axpy(&self, dst: &mut [Elem], factor: Elem, src: &[Elem]) {
        debug_assert_eq!(dst.len(), src.len());
        if factor == 0 {
            return;
        }
        if self.q == 2 {
            for (d, s) in dst.iter_mut().zip(src) {
                *d ^= *s;
            }
            return;
        }
        let q = self.q;
        let f = factor as u32;
        for (d, s) in dst.iter_mut().zip(src) {
            *d = ((*d as u32 + f * *s as u32) % q) as Elem;
        }
    }

    /// `v *= factor`, entry-wise.
    #[inline]
    pub fn scale(&self, v: &mut [Elem], factor: Elem) {
        if factor == 1 {
            return;
        }
        for x in v.iter_mut() {
            *x = self.mul(*x, factor);
        }
    }

    pub fn dot(&self, a: &[Elem], b: &[Elem]) -> Elem {
        let q = self.q as u64;
        let acc = a
            .iter()
            .zip(b)
            .fold(0u64, |acc, (&x, &y)| (acc + x as u64 * y as u64) % q);
        acc as Elem
    }
}

impl TryFrom<u32> for FieldSpec {
    type Error = Error;
    fn try_from(q: u32) -> Result<Self> {
        FieldSpec::new(q)
    }
}

impl From<FieldSpec> for u32 {
    fn from(f: FieldSpec) -> u32 {
        f.q
    }
}

fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_composites_and_out_of_range() {
        assert!(FieldSpec::new(4).is_err());
        assert!(FieldSpec::new(1).is_err());
        assert!(FieldSpec::new(65536).is_err());
        assert!(FieldSpec::new(65521).is_ok());
        assert!(FieldSpec::new(3).is_ok());
    }

    #[test]
    fn inverses() {
        for q in [2u32, 3, 5, 7, 13, 65521] {
            let f = FieldSpec::new(q).unwrap();
            for a in 1..q.min(500) {
                let a = a as Elem;
                assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            }
            assert_eq!(f.inv(0), None);
        }
    }

    #[test]
    fn add_sub_neg_are_consistent() {
        let f = FieldSpec::new(7).unwrap();
        for a in 0..7 {
            for b in 0..7 {
                assert_eq!(f.sub(f.add(a, b), b), a);
                assert_eq!(f.add(a, f.neg(a)), 0);
            }
        }
    }
}
