//! Density evolution for the subspace decoder.
//!
//! Two layers: the scalar recursion α_{t+1} = F_{k,ρ}(α_t) of the rescaled
//! dimensions, and a finite-m population dynamics for the message
//! dimensions, whose kernel is realized by sampling random subspaces.

use num_bigint::BigUint;
use num_traits::Zero;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::counting::{gaussian_binomial, log2_big};
use crate::ensemble::degree::{rho_star_coefficient, EdgeDegreeDistribution};
use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::matrix::Matrix;
use crate::rational::{self, int, Rational};
use crate::rng;

/// f_{k,i}(α) = Σ_{j=k}^{i-1} C(i-1,j) α^j (1-α)^{i-1-j}, i.e. P{Bin(i-1, α) ≥ k}.
pub fn f_poly(k: usize, i: usize, alpha: f64) -> Result<f64> {
    if i < k {
        return Err(Error::OutOfRange(format!("f_(k,i) needs i >= k, got k={k} i={i}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange(format!("alpha={alpha} outside [0, 1]")));
    }
    let n = i - 1;
    if k > n {
        return Ok(0.0);
    }
    let term = |j: usize| -> f64 {
        let ln = ln_binomial(n as u64, j as u64);
        let a = if j == 0 { 1.0 } else { alpha.powi(j as i32) };
        let b = if n == j { 1.0 } else { (1.0 - alpha).powi((n - j) as i32) };
        ln.exp() * a * b
    };
    // Sum whichever side has fewer terms.
    if n + 1 - k <= k {
        Ok((k..=n).map(term).sum::<f64>().min(1.0))
    } else {
        Ok((1.0 - (0..k).map(term).sum::<f64>()).clamp(0.0, 1.0))
    }
}

pub fn f_poly_exact(k: usize, i: usize, alpha: &Rational) -> Result<Rational> {
    if i < k {
        return Err(Error::OutOfRange(format!("f_(k,i) needs i >= k, got k={k} i={i}")));
    }
    let n = i - 1;
    let one_minus = int(1) - alpha;
    let mut acc = int(0);
    for j in k..=n {
        let c = num_integer::binomial(BigUint::from(n), BigUint::from(j));
        let c = Rational::from_integer(c.into());
        acc += c * num_traits::pow(alpha.clone(), j) * num_traits::pow(one_minus.clone(), n - j);
    }
    Ok(acc)
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// ln f_{k,i}(α) from ln α, exact in relative terms for tiny α.
pub fn ln_f_poly(k: usize, i: usize, ln_alpha: f64) -> f64 {
    let n = i - 1;
    if k > n {
        return f64::NEG_INFINITY;
    }
    let ln_one_minus = (-ln_alpha.exp()).ln_1p();
    log_sum_exp((k..=n).map(|j| {
        let a = if j == 0 { 0.0 } else { j as f64 * ln_alpha };
        let b = if n == j { 0.0 } else { (n - j) as f64 * ln_one_minus };
        ln_binomial(n as u64, j as u64) + a + b
    }))
}

/// F_{k,ρ}(α) = Σ_n ρ_n f_{k,n}(α).
pub fn big_f(k: usize, rho: &EdgeDegreeDistribution, alpha: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (&n, r) in rho.coeffs() {
        acc += rational::to_f64(r) * f_poly(k, n, alpha)?;
    }
    Ok(acc)
}

pub fn big_f_exact(k: usize, rho: &EdgeDegreeDistribution, alpha: &Rational) -> Result<Rational> {
    let mut acc = int(0);
    for (&n, r) in rho.coeffs() {
        acc += r * f_poly_exact(k, n, alpha)?;
    }
    Ok(acc)
}

pub fn ln_big_f(k: usize, rho: &EdgeDegreeDistribution, ln_alpha: f64) -> f64 {
    log_sum_exp(
        rho.coeffs()
            .iter()
            .map(|(&n, r)| rational::to_f64(r).ln() + ln_f_poly(k, n, ln_alpha)),
    )
}

/// |Σ_{i=k+1}^{b_eval} ρ*_{k,i} f_{k,i}(α) - α|.
pub fn fixed_point_residual(k: usize, b_eval: usize, alpha: f64) -> Result<f64> {
    if k < 2 || b_eval <= k {
        return Err(Error::OutOfRange(format!("need k >= 2 and b_eval > k, got k={k} b_eval={b_eval}")));
    }
    let mut acc = 0.0;
    for i in k + 1..=b_eval {
        acc += rational::to_f64(&rho_star_coefficient(k, i)) * f_poly(k, i, alpha)?;
    }
    Ok((acc - alpha).abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarDeConfig {
    pub k: usize,
    pub rho: EdgeDegreeDistribution,
    pub max_iters: usize,
    pub epsilon_stop: f64,
    /// Points at or below this value are ignored by the γ estimate.
    pub gamma_floor: f64,
}

impl ScalarDeConfig {
    pub fn new(k: usize, rho: EdgeDegreeDistribution) -> Self {
        ScalarDeConfig { k, rho, max_iters: 50, epsilon_stop: 0.0, gamma_floor: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarDeTrajectory {
    pub alphas: Vec<f64>,
    /// ln α_t, kept where α_t underflows f64.
    pub ln_alphas: Vec<f64>,
    pub gamma_estimate: Option<f64>,
}

/// α_0 = 1, α_{t+1} = F_{k,ρ}(α_t), carried in the log domain.
pub fn scalar_de_run(config: &ScalarDeConfig) -> Result<ScalarDeTrajectory> {
    if config.k < 2 {
        return Err(Error::InvalidParams(format!("k={} must be at least 2", config.k)));
    }
    if config.rho.min_degree() < config.k {
        return Err(Error::InvalidParams(format!(
            "rho has degree {} below k={}",
            config.rho.min_degree(),
            config.k
        )));
    }
    let mut ln_alphas = vec![0.0f64];
    while ln_alphas.len() <= config.max_iters {
        let cur = *ln_alphas.last().expect("non-empty");
        if cur == f64::NEG_INFINITY || cur.exp() <= config.epsilon_stop {
            break;
        }
        ln_alphas.push(ln_big_f(config.k, &config.rho, cur).min(0.0));
    }
    let alphas = ln_alphas.iter().map(|l| l.exp()).collect();
    let gamma_estimate = estimate_gamma(&ln_alphas, config.gamma_floor);
    Ok(ScalarDeTrajectory { alphas, ln_alphas, gamma_estimate })
}

/// Mean of log α_{t+1} / log α_t over the last three points with
/// 0 < α < 1 and α above `floor`.
pub fn estimate_gamma(ln_alphas: &[f64], floor: f64) -> Option<f64> {
    let ln_floor = floor.ln();
    let usable: Vec<f64> = ln_alphas.iter().cloned().filter(|&l| l < 0.0 && l > ln_floor).collect();
    if usable.len() < 2 {
        return None;
    }
    let tail = &usable[usable.len().saturating_sub(3)..];
    let ratios: Vec<f64> = tail.windows(2).map(|w| w[1] / w[0]).collect();
    Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
}

/// [Σ ξ_i + 1 - k_ratio] clamped to [0, 1].
pub fn xi_sample_update(k_ratio: f64, xis: &[f64]) -> f64 {
    (xis.iter().sum::<f64>() + 1.0 - k_ratio).clamp(0.0, 1.0)
}

fn check_dims(dims: &[usize], m: usize) -> Result<()> {
    match dims.iter().find(|&&d| d > m) {
        Some(d) => Err(Error::OutOfRange(format!("dimension {d} exceeds ambient {m}"))),
        None => Ok(()),
    }
}

/// d1⊙d2 = max(0, d1+d2-m).
pub fn meet_dim(d1: usize, d2: usize, m: usize) -> Result<usize> {
    check_dims(&[d1, d2], m)?;
    Ok((d1 + d2).saturating_sub(m))
}

/// d1⊞d2 = min(m, d1+d2).
pub fn join_dim(d1: usize, d2: usize, m: usize) -> Result<usize> {
    check_dims(&[d1, d2], m)?;
    Ok((d1 + d2).min(m))
}

/// [Σ dims + d - m] clamped to [0, d].
pub fn typical_intersection_dim(dims: &[usize], d: usize, m: usize) -> Result<usize> {
    check_dims(dims, m)?;
    check_dims(&[d], m)?;
    let total = dims.iter().sum::<usize>() + d;
    Ok(total.saturating_sub(m).min(d))
}

/// Law of dim(V1 ∩ V2) for fixed V1 of dimension d1 and uniform V2 of
/// dimension d2 in (F_q)^m:
/// P{j} = q^{(d1-j)(d2-j)} [d1 j]_q [m-d1, d2-j]_q / [m d2]_q.
pub fn intersection_dim_pmf(m: usize, d1: usize, d2: usize, q: u32) -> Result<Vec<f64>> {
    check_dims(&[d1, d2], m)?;
    let total = gaussian_binomial(m, d2, q)?;
    let ln_total = log2_big(&total);
    let qb = BigUint::from(q);
    let mut out = vec![0.0; d1.min(d2) + 1];
    for (j, slot) in out.iter_mut().enumerate() {
        if d2 - j > m - d1 {
            continue;
        }
        let count = qb.pow(((d1 - j) * (d2 - j)) as u32)
            * gaussian_binomial(d1, j, q)?
            * gaussian_binomial(m - d1, d2 - j, q)?;
        if !count.is_zero() {
            *slot = (log2_big(&count) - ln_total).exp2();
        }
    }
    Ok(out)
}

/// dim(S ∩ V) for S the row space of `gens` and V the first `d` coordinates.
fn dim_meet_coordinate(gens: &Matrix, d: usize) -> usize {
    if gens.rows() == 0 {
        return 0;
    }
    gens.rank() - gens.col_block(d..gens.cols()).rank()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationDeConfig {
    pub field: FieldSpec,
    pub m: usize,
    pub d: usize,
    pub rho: EdgeDegreeDistribution,
    pub population_size: usize,
    pub max_iters: usize,
}

impl PopulationDeConfig {
    fn validate(&self) -> Result<()> {
        if self.d > self.m {
            return Err(Error::InvalidParams(format!("D={} exceeds m={}", self.d, self.m)));
        }
        if self.population_size < 100 {
            return Err(Error::InvalidParams(format!(
                "population_size={} is below 100",
                self.population_size
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationState {
    pub t: usize,
    pub dims: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub t: usize,
    pub frac_zero: f64,
    pub frac_full: f64,
    pub frac_interior: f64,
    pub mean_dim: f64,
}

impl PopulationState {
    pub fn summary(&self, d: usize) -> PopulationSummary {
        let n = self.dims.len() as f64;
        let zero = self.dims.iter().filter(|&&x| x == 0).count() as f64;
        let full = self.dims.iter().filter(|&&x| x == d).count() as f64;
        // With d = 0 every member is both zero and full.
        let interior = n - zero - if d == 0 { 0.0 } else { full };
        PopulationSummary {
            t: self.t,
            frac_zero: zero / n,
            frac_full: full / n,
            frac_interior: interior / n,
            mean_dim: self.dims.iter().sum::<usize>() as f64 / n,
        }
    }

    /// Fraction of members with dimension at least `threshold`.
    pub fn frac_at_least(&self, threshold: usize) -> f64 {
        self.dims.iter().filter(|&&x| x >= threshold).count() as f64 / self.dims.len() as f64
    }

    /// Empirical law of the dimensions on {0, …, d}.
    pub fn distribution(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d + 1];
        for &x in &self.dims {
            out[x] += 1.0;
        }
        let n = self.dims.len() as f64;
        out.iter_mut().for_each(|v| *v /= n);
        out
    }
}

fn sample_degree<R: Rng + ?Sized>(weights: &[(usize, f64)], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(d, w) in weights {
        acc += w;
        if u < acc {
            return d;
        }
    }
    weights.last().expect("non-empty").0
}

/// One generation: each member draws n ~ ρ, n-1 parent dimensions, uniform
/// subspaces of those dimensions, and records dim((V_1+…+V_{n-1}) ∩ V).
fn population_step(config: &PopulationDeConfig, state: &PopulationState, seed: u64) -> PopulationState {
    let weights = config.rho.weights();
    let t = state.t + 1;
    let gen_seed = rng::derive_seed(seed, t as u64, rng::POPULATION);
    let dims = (0..config.population_size)
        .into_par_iter()
        .map(|j| {
            let mut rng = rng::stream(gen_seed, j as u64, rng::POPULATION);
            let n = sample_degree(&weights, &mut rng);
            let parents: Vec<usize> = (1..n)
                .map(|_| state.dims[rng.random_range(0..state.dims.len())])
                .collect();
            let rows: usize = parents.iter().sum();
            let mut gens = Matrix::zeros(config.field, rows, config.m);
            let mut at = 0;
            for &d in &parents {
                let block = Matrix::random_full_rank(config.field, d, config.m, &mut rng);
                for r in 0..d {
                    gens.row_mut(at + r).copy_from_slice(block.row(r));
                }
                at += d;
            }
            dim_meet_coordinate(&gens, config.d)
        })
        .collect();
    PopulationState { t, dims }
}

/// Runs `max_iters` generations from D^(0) = D; returns every state
/// including t = 0.
pub fn population_de_run(config: &PopulationDeConfig, seed: u64) -> Result<Vec<PopulationState>> {
    config.validate()?;
    let mut states = vec![PopulationState { t: 0, dims: vec![config.d; config.population_size] }];
    for _ in 0..config.max_iters {
        let next = population_step(config, states.last().expect("non-empty"), seed);
        states.push(next);
    }
    Ok(states)
}

/// Probability that a row stays undetermined: its two messages, with
/// dimensions drawn independently from `state` and uniform directions inside
/// the D-dimensional noise space, meet nontrivially.
pub fn predicted_symbol_error(state: &PopulationState, d: usize, q: u32) -> Result<f64> {
    let law = state.distribution(d);
    let mut p = 0.0;
    for (d1, &p1) in law.iter().enumerate() {
        if p1 == 0.0 {
            continue;
        }
        for (d2, &p2) in law.iter().enumerate() {
            if p2 == 0.0 {
                continue;
            }
            let pmf = intersection_dim_pmf(d, d1, d2, q)?;
            p += p1 * p2 * (1.0 - pmf[0]);
        }
    }
    Ok(p.clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub m: usize,
    pub d1: usize,
    pub d2: usize,
    pub slack: usize,
    pub q: u32,
    pub trials: usize,
    /// Frequency of dim(V1∩V2) ≥ d1⊙d2 + slack.
    pub frequency: f64,
    /// q^{-slack - max(0, m-d1-d2)}.
    pub stated_bound: f64,
    /// Markov with the exact mean: E|V1∩V2| · q^{-(d1⊙d2) - slack}.
    pub markov_bound: f64,
    /// Exact tail probability from the intersection law.
    pub exact_tail: f64,
    pub stated_ok: bool,
    pub markov_ok: bool,
    pub floor_ok: bool,
}

fn three_sigma(p: f64, trials: usize) -> f64 {
    let p = p.clamp(0.0, 1.0);
    3.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Samples V2 uniform of dimension d2 against V1 = first d1 coordinates and
/// compares the upper-deviation frequency with the bounds.
pub fn deviation_bound_check(
    m: usize,
    d1: usize,
    d2: usize,
    slack: usize,
    trials: usize,
    q: u32,
    seed: u64,
) -> Result<DeviationReport> {
    check_dims(&[d1, d2], m)?;
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be positive".into()));
    }
    let field = FieldSpec::new(q)?;
    let meet = meet_dim(d1, d2, m)?;
    let threshold = meet + slack;
    let dims: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|j| {
            let mut rng = rng::stream(seed, j as u64, rng::DEVIATION);
            let v2 = Matrix::random_full_rank(field, d2, m, &mut rng);
            dim_meet_coordinate(&v2, d1)
        })
        .collect();
    let hits = dims.iter().filter(|&&d| d >= threshold).count();
    let frequency = hits as f64 / trials as f64;
    let floor_ok = dims.iter().all(|&d| d >= meet);

    let qf = q as f64;
    let stated_bound = qf.powi(-(slack as i32) - (m.saturating_sub(d1 + d2)) as i32);
    let mean_size = 1.0 + (qf.powi(d1 as i32) - 1.0) * (qf.powi(d2 as i32) - 1.0) / (qf.powi(m as i32) - 1.0);
    let markov_bound = mean_size * qf.powi(-(meet as i32) - slack as i32);
    let pmf = intersection_dim_pmf(m, d1, d2, q)?;
    let exact_tail = pmf.iter().skip(threshold).sum::<f64>().min(1.0);

    let within = |bound: f64| bound >= 1.0 || frequency <= bound + three_sigma(bound, trials);
    Ok(DeviationReport {
        m,
        d1,
        d2,
        slack,
        q,
        trials,
        frequency,
        stated_bound,
        markov_bound,
        exact_tail,
        stated_ok: within(stated_bound),
        markov_ok: within(markov_bound),
        floor_ok,
    })
}

/// Total variation distance ½ Σ |p_i - r_i|; shorter inputs are zero-padded.
pub fn tv_distance(p: &[f64], r: &[f64]) -> f64 {
    let n = p.len().max(r.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|i| (at(p, i) - at(r, i)).abs()).sum::<f64>()
}

/// E|V1∩V2| - 1 for uniform subspaces, as an exact rational.
pub fn expected_nonzero_intersection(m: usize, d1: usize, d2: usize, q: u32) -> Rational {
    let qb = |e: usize| Rational::from_integer(BigUint::from(q).pow(e as u32).into());
    (qb(d1) - int(1)) * (qb(d2) - int(1)) / (qb(m) - int(1))
}
