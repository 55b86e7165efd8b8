//! The symmetric network coding channel SNC(λ,ω): `y = x + z` with `z`
//! uniform among ℓ×m matrices of rank s = ℓω.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::counting::{gaussian_binomial, log_q_big};
use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::matrix::Matrix;
use crate::rational::{self, int, Rational};
use crate::subspace::Subspace;

/// Validated channel parameters. `n` is the packet length N.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SncParams {
    pub field: FieldSpec,
    pub n: usize,
    pub l: usize,
    pub m: usize,
    #[serde(with = "rational::serde_str")]
    pub lambda: Rational,
    #[serde(with = "rational::serde_str")]
    pub omega: Rational,
    pub s: usize,
}

impl SncParams {
    pub fn q(&self) -> u32 {
        self.field.q()
    }

    /// Symbols per block, Nℓ.
    pub fn block_symbols(&self) -> usize {
        self.n * self.l
    }

    pub fn capacity(&self) -> Rational {
        capacity(&self.lambda, &self.omega).expect("validated parameters")
    }
}

fn check_lambda(lambda: &Rational) -> Result<()> {
    if *lambda <= int(0) || *lambda >= int(1) {
        return Err(Error::InvalidParams(format!("lambda={} must lie in (0, 1)", rational::format(lambda))));
    }
    Ok(())
}

fn check_omega(omega: &Rational, max: &Rational) -> Result<()> {
    if *omega < int(0) || omega > max {
        return Err(Error::InvalidParams(format!(
            "omega={} must lie in [0, {}]",
            rational::format(omega),
            rational::format(max)
        )));
    }
    Ok(())
}

/// Checks every integrality constraint and builds [`SncParams`].
pub fn validate_params(field: FieldSpec, n: usize, lambda: &Rational, omega: &Rational) -> Result<SncParams> {
    check_lambda(lambda)?;
    check_omega(omega, &int(1))?;
    let l_r = lambda * int(n as i64);
    let l = rational::as_usize(&l_r).ok_or_else(|| {
        Error::InvalidParams(format!(
            "l = lambda*N = {}*{} = {} is not an integer",
            rational::format(lambda),
            n,
            rational::format(&l_r)
        ))
    })?;
    let s_r = omega * int(l as i64);
    let s = rational::as_usize(&s_r).ok_or_else(|| {
        Error::InvalidParams(format!(
            "s = omega*l = {}*{} = {} is not an integer",
            rational::format(omega),
            l,
            rational::format(&s_r)
        ))
    })?;
    let m = n - l;
    if s > l.min(m) {
        return Err(Error::InvalidParams(format!("s={s} exceeds min(l, m) = min({l}, {m})")));
    }
    Ok(SncParams { field, n, l, m, lambda: lambda.clone(), omega: omega.clone(), s })
}

/// C = 1 - λ - ω + λω².
pub fn capacity(lambda: &Rational, omega: &Rational) -> Result<Rational> {
    check_lambda(lambda)?;
    check_omega(omega, &int(1))?;
    Ok(int(1) - lambda - omega + lambda * omega * omega)
}

/// (1-λ)(1-2ω), defined for ω ≤ 1/2.
pub fn singleton_bound(lambda: &Rational, omega: &Rational) -> Result<Rational> {
    check_lambda(lambda)?;
    check_omega(omega, &rational::ratio(1, 2))?;
    Ok((int(1) - lambda) * (int(1) - int(2) * omega))
}

/// k = (1-λ)/(λω) when it is a positive integer and 0 < ω < 1.
pub fn achievable_k(lambda: &Rational, omega: &Rational) -> Option<usize> {
    if check_lambda(lambda).is_err() || *omega <= int(0) || *omega >= int(1) {
        return None;
    }
    let k = (int(1) - lambda) / (lambda * omega);
    rational::as_usize(&k).filter(|&k| k >= 1)
}

/// The points ω = ((1-λ)/λ)/k in (0, 1) with k ≤ `max_k`, as (k, ω).
pub fn achievable_dots(lambda: &Rational, max_k: usize) -> Result<Vec<(usize, Rational)>> {
    check_lambda(lambda)?;
    let ratio = (int(1) - lambda) / lambda;
    Ok((1..=max_k)
        .map(|k| (k, &ratio / int(k as i64)))
        .filter(|(_, w)| *w > int(0) && *w < int(1))
        .collect())
}

/// A(s,ℓ,m): number of ℓ×m matrices of rank s.
pub fn exact_rank_count(s: usize, l: usize, m: usize, q: u32) -> Result<BigUint> {
    if s > l.min(m) {
        return Err(Error::OutOfRange(format!("rank {s} exceeds min({l}, {m})")));
    }
    let qb = BigUint::from(q);
    let qm = qb.pow(m as u32);
    let mut prod = BigUint::one();
    for i in 0..s {
        prod *= &qm - qb.pow(i as u32);
    }
    Ok(gaussian_binomial(l, s, q)? * prod)
}

/// Enumeration guard for brute-force counts.
pub const ENUMERATION_GUARD_BITS: f64 = 24.0;

/// Rank histogram of all ℓ×m matrices over F_q, by enumeration.
pub fn rank_histogram(l: usize, m: usize, q: u32) -> Result<Vec<BigUint>> {
    let field = FieldSpec::new(q)?;
    let exponent = l * m;
    if exponent as f64 * (q as f64).log2() > ENUMERATION_GUARD_BITS {
        return Err(Error::EnumerationGuard { q, exponent });
    }
    let total = (q as u64).pow(exponent as u32);
    let mut hist = vec![0u64; l.min(m) + 1];
    let mut digits = vec![0u64; exponent];
    for _ in 0..total {
        let mat = Matrix::from_vec(field, l, m, digits.iter().map(|&d| d as u16).collect())?;
        hist[mat.rank()] += 1;
        for d in digits.iter_mut() {
            *d += 1;
            if *d < q as u64 {
                break;
            }
            *d = 0;
        }
    }
    Ok(hist.into_iter().map(BigUint::from).collect())
}

pub fn brute_force_rank_count(s: usize, l: usize, m: usize, q: u32) -> Result<BigUint> {
    let hist = rank_histogram(l, m, q)?;
    Ok(hist.get(s).cloned().unwrap_or_else(BigUint::zero))
}

/// ω - λω², the per-symbol entropy of the noise as N grows.
pub fn asymptotic_noise_entropy(lambda: &Rational, omega: &Rational) -> Result<Rational> {
    check_lambda(lambda)?;
    check_omega(omega, &int(1))?;
    Ok(omega - lambda * omega * omega)
}

/// log_q A(s,ℓ,m) / (Nℓ), the exact per-symbol noise entropy.
pub fn normalized_noise_entropy(params: &SncParams) -> f64 {
    let a = exact_rank_count(params.s, params.l, params.m, params.q()).expect("validated parameters");
    log_q_big(&a, params.q()) / params.block_symbols() as f64
}

/// log_q A(s,ℓ,m) - s(ℓ+m-s).
pub fn rank_count_correction(s: usize, l: usize, m: usize, q: u32) -> Result<f64> {
    let a = exact_rank_count(s, l, m, q)?;
    Ok(log_q_big(&a, q) - (s * (l + m - s)) as f64)
}

/// Probability that `r` of the ℓ rows of a uniform rank-s noise matrix
/// already span its row space: Π_{i<s} (1 - q^{i-r}) / (1 - q^{i-ℓ}).
pub fn noise_recovery_probability(l: usize, s: usize, r: usize, q: u32) -> f64 {
    if s > r {
        return 0.0;
    }
    let qf = q as f64;
    (0..s)
        .map(|i| (1.0 - qf.powi(i as i32 - r as i32)) / (1.0 - qf.powi(i as i32 - l as i32)))
        .product()
}

/// Simulator-side ground truth, never shown to the decoder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truth {
    pub x: Matrix,
    pub z: Matrix,
    pub noise_space: Subspace,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelOutput {
    pub y: Matrix,
    pub truth: Option<Truth>,
}

pub fn transmit<R: Rng + ?Sized>(x: &Matrix, params: &SncParams, rng: &mut R) -> Result<ChannelOutput> {
    if x.rows() != params.l || x.cols() != params.m || x.field() != params.field {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} matrix over F_{}", params.l, params.m, params.q()),
            got: format!("{}x{} matrix over F_{}", x.rows(), x.cols(), x.field().q()),
        });
    }
    let z = Matrix::random_rank(params.l, params.m, params.s, params.field, rng)?;
    let y = x.add(&z)?;
    let noise_space = z.row_space();
    Ok(ChannelOutput { y, truth: Some(Truth { x: x.clone(), z, noise_space }) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{parse, ratio};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn validate_examples() {
        let p = validate_params(FieldSpec::binary(), 72, &ratio(1, 2), &ratio(1, 3)).unwrap();
        assert_eq!((p.l, p.m, p.s), (36, 36, 12));
        assert!(validate_params(FieldSpec::binary(), 10, &ratio(1, 3), &ratio(0, 1)).is_err());
        let p = validate_params(FieldSpec::binary(), 12, &ratio(1, 6), &ratio(1, 2)).unwrap();
        assert_eq!((p.l, p.m, p.s), (2, 10, 1));
        assert!(validate_params(FieldSpec::binary(), 12, &ratio(1, 6), &ratio(1, 3)).is_err());
        // s > m
        assert!(validate_params(FieldSpec::binary(), 4, &ratio(3, 4), &ratio(2, 3)).is_err());
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity(&ratio(1, 6), &int(0)).unwrap(), ratio(5, 6));
        assert_eq!(capacity(&ratio(1, 6), &parse("1/5").unwrap()).unwrap(), ratio(16, 25));
        assert_eq!(capacity(&ratio(1, 2), &ratio(1, 3)).unwrap(), ratio(2, 9));
        assert!(capacity(&int(1), &int(0)).is_err());
        assert!(capacity(&ratio(1, 2), &ratio(3, 2)).is_err());
    }

    #[test]
    fn singleton_examples() {
        assert_eq!(singleton_bound(&ratio(1, 3), &int(0)).unwrap(), ratio(2, 3));
        assert_eq!(singleton_bound(&ratio(1, 6), &ratio(1, 5)).unwrap(), ratio(1, 2));
        assert_eq!(singleton_bound(&ratio(1, 6), &ratio(1, 2)).unwrap(), int(0));
        assert!(singleton_bound(&ratio(1, 6), &ratio(3, 5)).is_err());
    }

    #[test]
    fn achievable_k_examples() {
        assert_eq!(achievable_k(&ratio(1, 2), &ratio(1, 3)), Some(3));
        assert_eq!(achievable_k(&ratio(1, 6), &ratio(5, 7)), Some(7));
        assert_eq!(achievable_k(&ratio(1, 2), &ratio(3, 10)), None);
        let dots = achievable_dots(&ratio(1, 6), 8).unwrap();
        assert_eq!(dots, vec![(6, ratio(5, 6)), (7, ratio(5, 7)), (8, ratio(5, 8))]);
    }

    #[test]
    fn rank_counts() {
        assert_eq!(exact_rank_count(0, 3, 4, 2).unwrap(), BigUint::one());
        assert_eq!(exact_rank_count(1, 2, 2, 2).unwrap(), BigUint::from(9u32));
        assert_eq!(exact_rank_count(2, 2, 2, 2).unwrap(), BigUint::from(6u32));
        assert_eq!(brute_force_rank_count(1, 2, 2, 2).unwrap(), BigUint::from(9u32));
        assert_eq!(brute_force_rank_count(0, 3, 2, 2).unwrap(), BigUint::one());
        let total: BigUint = rank_histogram(2, 3, 3).unwrap().into_iter().sum();
        assert_eq!(total, BigUint::from(3u32).pow(6));
        assert!(matches!(brute_force_rank_count(1, 5, 5, 2), Err(Error::EnumerationGuard { .. })));
    }

    #[test]
    fn rank_count_correction_is_bounded() {
        for q in [2u32, 3] {
            for l in 1..=16 {
                for m in 1..=16 {
                    for s in 0..=l.min(m) {
                        let c = rank_count_correction(s, l, m, q).unwrap();
                        assert!((-2.0..=2.0).contains(&c), "s={s} l={l} m={m} q={q}: {c}");
                    }
                }
            }
        }
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(asymptotic_noise_entropy(&ratio(1, 2), &int(0)).unwrap(), int(0));
        assert_eq!(asymptotic_noise_entropy(&ratio(1, 3), &ratio(1, 2)).unwrap(), ratio(5, 12));
        let a = exact_rank_count(2, 4, 8, 2).unwrap();
        let v = log_q_big(&a, 2) / 48.0;
        assert!((v - 5.0 / 12.0).abs() < 0.1);
    }

    #[test]
    fn entropy_completes_capacity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let lambda = ratio(rng.random_range(1..100), 100);
            let omega = ratio(rng.random_range(0..=100), 100);
            let h = asymptotic_noise_entropy(&lambda, &omega).unwrap();
            assert_eq!(int(1) - &lambda - h, capacity(&lambda, &omega).unwrap());
        }
    }

    #[test]
    fn normalized_entropy_trend() {
        let target = 1.0 / 3.0 - 0.5 / 9.0;
        let mut prev = f64::INFINITY;
        for n in [24, 48, 96] {
            let p = validate_params(FieldSpec::binary(), n, &ratio(1, 2), &ratio(1, 3)).unwrap();
            let dev = (normalized_noise_entropy(&p) - target).abs();
            assert!(dev <= 3.0 / p.l as f64);
            assert!(dev < prev);
            prev = dev;
        }
    }

    #[test]
    fn transmit_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = validate_params(FieldSpec::new(3).unwrap(), 12, &ratio(1, 2), &ratio(1, 3)).unwrap();
        let x = Matrix::random(p.field, p.l, p.m, &mut rng);
        for _ in 0..20 {
            let out = transmit(&x, &p, &mut rng).unwrap();
            let t = out.truth.unwrap();
            assert_eq!(out.y.sub(&x).unwrap(), t.z);
            assert_eq!(t.z.rank(), p.s);
            assert_eq!(t.noise_space.dim(), p.s);
            for r in 0..p.l {
                assert!(t.noise_space.contains(t.z.row(r)));
            }
        }
        let p0 = validate_params(FieldSpec::binary(), 12, &ratio(1, 2), &int(0)).unwrap();
        let x0 = Matrix::random(p0.field, p0.l, p0.m, &mut rng);
        assert_eq!(transmit(&x0, &p0, &mut rng).unwrap().y, x0);
        assert!(transmit(&Matrix::zeros(p.field, 2, 2), &p, &mut rng).is_err());
    }

    #[test]
    fn recovery_probability_values() {
        assert_eq!(noise_recovery_probability(36, 0, 0, 2), 1.0);
        let p = noise_recovery_probability(36, 12, 12, 2);
        assert!(p > 0.28 && p < 0.3, "{p}");
        assert!(noise_recovery_probability(36, 12, 14, 2) > p);
        assert_eq!(noise_recovery_probability(36, 12, 11, 2), 0.0);
    }
}
