//! Experiment runners behind the command-line tool. Every runner is a pure
//! function of its spec (including the master seed) and returns the exact
//! bytes to write.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::distribution::{Beta, Binomial, ContinuousCDF, DiscreteCDF};

use crate::channel::{self, noise_recovery_probability, transmit, validate_params, SncParams};
use crate::decoder::{decode_with_monitor, symbol_error_rate, truth_contained, wrong_determinations, DecoderConfig};
use crate::density::{
    self, population_de_run, predicted_symbol_error, scalar_de_run, PopulationDeConfig, ScalarDeConfig,
};
use crate::ensemble::{encode, exact_rate, rho_star, sample_code, LiftedCode};
use crate::error::{Error, Result};
use crate::field::{Elem, FieldSpec};
use crate::matrix::Matrix;
use crate::rational::{self, int, Rational};
use crate::rng;
use crate::subspace::{AffineSubspace, Subspace};

/// Formats a value given by its natural log, so magnitudes below f64 range
/// still print (e.g. `4.093948579216e-396`).
pub fn format_from_ln(ln: f64) -> String {
    if ln == f64::NEG_INFINITY {
        return "0".into();
    }
    let log10 = ln / std::f64::consts::LN_10;
    let exp = log10.floor();
    let mant = 10f64.powf(log10 - exp);
    let (mant, exp) = if format!("{mant:.12}").starts_with("10") { (mant / 10.0, exp + 1.0) } else { (mant, exp) };
    format!("{mant:.12}e{}", exp as i64)
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

// ---------------------------------------------------------------- capacity

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityCurveSpec {
    #[serde(with = "rational::serde_str")]
    pub lambda: Rational,
    #[serde(with = "rational::serde_str")]
    pub omega_step: Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CapacityRow {
    pub omega: Rational,
    pub capacity: Rational,
    pub singleton: Option<Rational>,
    pub achievable_k: Option<usize>,
}

/// Grid points j·step in (0, 1) merged with the achievable points.
pub fn capacity_curve(spec: &CapacityCurveSpec) -> Result<Vec<CapacityRow>> {
    if spec.omega_step <= int(0) || spec.omega_step >= int(1) {
        return Err(Error::InvalidParams("omega step must lie in (0, 1)".into()));
    }
    let mut omegas: BTreeSet<Rational> = BTreeSet::new();
    let mut w = spec.omega_step.clone();
    while w < int(1) {
        omegas.insert(w.clone());
        w += &spec.omega_step;
    }
    let max_k = rational::as_usize(&((int(1) - &spec.lambda) / &spec.lambda / &spec.omega_step).ceil())
        .unwrap_or(0);
    for (_, w) in channel::achievable_dots(&spec.lambda, max_k)? {
        omegas.insert(w);
    }
    omegas
        .into_iter()
        .map(|omega| {
            let capacity = channel::capacity(&spec.lambda, &omega)?;
            let singleton = channel::singleton_bound(&spec.lambda, &omega).ok();
            let achievable_k = channel::achievable_k(&spec.lambda, &omega);
            Ok(CapacityRow { omega, capacity, singleton, achievable_k })
        })
        .collect()
}

pub fn capacity_curve_csv(spec: &CapacityCurveSpec) -> Result<String> {
    let rows = capacity_curve(spec)?;
    let mut out = format!(
        "# schema=capacity-curve/v1 lambda={} omega_step={}\nomega,capacity,singleton,achievable_k\n",
        rational::format(&spec.lambda),
        rational::format(&spec.omega_step)
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt(rational::to_f64(&r.omega)),
            fmt(rational::to_f64(&r.capacity)),
            r.singleton.map(|s| fmt(rational::to_f64(&s))).unwrap_or_default(),
            r.achievable_k.map(|k| k.to_string()).unwrap_or_default()
        );
    }
    Ok(out)
}

// ------------------------------------------------------------ degree report

pub fn degree_report(k: usize, b: usize, lambda: &Rational, omega: &Rational) -> Result<serde_json::Value> {
    let r = rho_star(k, b)?;
    let node = r.dist.to_node();
    let map = |m: &std::collections::BTreeMap<usize, Rational>| -> serde_json::Map<String, serde_json::Value> {
        m.iter().map(|(d, c)| (d.to_string(), json!(rational::format(c)))).collect()
    };
    let ratio = node.derivative_ratio();
    let mean = node.mean();
    let design = if mean > int(2) {
        Some((int(1) - lambda) * (int(1) - omega) * (int(1) - int(2) / &mean))
    } else {
        None
    };
    Ok(json!({
        "schema": "degree-dist/v1",
        "k": k,
        "b": b,
        "lambda": rational::format(lambda),
        "omega": rational::format(omega),
        "rho": map(r.dist.coeffs()),
        "integral_rho": rational::format(&r.dist.integral()),
        "node": map(node.coeffs()),
        "p_prime_1": rational::format(&mean),
        "p_second_over_p_prime": rational::format(&ratio),
        "encoder_condition": ratio > int(1),
        "design_rate": design.as_ref().map(rational::format),
        "capacity": channel::capacity(lambda, omega).ok().map(|c| rational::format(&c)),
    }))
}

// ---------------------------------------------------------------- scalar DE

pub fn scalar_de_csv(k: usize, b: usize, max_iters: usize, epsilon_stop: f64) -> Result<String> {
    let mut config = ScalarDeConfig::new(k, rho_star(k, b)?.dist);
    config.max_iters = max_iters;
    config.epsilon_stop = epsilon_stop;
    scalar_de_csv_for(&config, &format!("k={k} b={b}"))
}

pub fn scalar_de_csv_for(config: &ScalarDeConfig, label: &str) -> Result<String> {
    let traj = scalar_de_run(config)?;
    let mut out = format!(
        "# schema=de-scalar/v1 {label} max_iters={} epsilon_stop={} gamma_estimate={}\nt,alpha\n",
        config.max_iters,
        fmt(config.epsilon_stop),
        traj.gamma_estimate.map(fmt).unwrap_or_default()
    );
    for (t, ln) in traj.ln_alphas.iter().enumerate() {
        let _ = writeln!(out, "{t},{}", format_from_ln(*ln));
    }
    Ok(out)
}

// ------------------------------------------------------------ population DE

pub fn population_de_csv(config: &PopulationDeConfig, seed: u64, label: &str) -> Result<String> {
    let states = population_de_run(config, seed)?;
    let mut out = format!(
        "# schema=de-population/v1 {label} q={} m={} D={} pop_size={} iters={} seed={seed}\nt,frac_zero,frac_full,frac_interior,mean_dim\n",
        config.field.q(),
        config.m,
        config.d,
        config.population_size,
        config.max_iters
    );
    for st in &states {
        let s = st.summary(config.d);
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.t,
            fmt(s.frac_zero),
            fmt(s.frac_full),
            fmt(s.frac_interior),
            fmt(s.mean_dim)
        );
    }
    Ok(out)
}

// --------------------------------------------------------------- campaigns

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub q: u32,
    pub n: usize,
    #[serde(with = "rational::serde_str")]
    pub lambda: Rational,
    #[serde(with = "rational::serde_str")]
    pub omega: Rational,
    /// ρ*_k truncated at b; k defaults to (1-λ)/(λω).
    pub k: Option<usize>,
    pub b: usize,
    /// Trailing zero rows ℓω'; defaults to s.
    pub zero_rows: Option<usize>,
    pub trials: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub fixed_code: bool,
    pub zero_codeword: bool,
    pub pop_size: usize,
}

impl CampaignSpec {
    pub fn new(q: u32, n: usize, lambda: Rational, omega: Rational) -> Self {
        CampaignSpec {
            q,
            n,
            lambda,
            omega,
            k: None,
            b: 6,
            zero_rows: None,
            trials: 100,
            max_iters: 20,
            seed: 1,
            fixed_code: false,
            zero_codeword: false,
            pop_size: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub code_seed: u64,
    pub outcome: String,
    pub noise_space_dim: usize,
    pub iterations: usize,
    pub undetermined: usize,
    pub wrong: usize,
    pub symbol_error: f64,
    pub truth_contained: bool,
    pub exact_rate: String,
    pub determined_per_iter: Vec<usize>,
    pub mean_dim_per_iter: Vec<f64>,
    pub max_dim_per_iter: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub params: SncParams,
    pub spec: CampaignSpec,
    pub k: usize,
    pub zero_rows: usize,
    pub n_v: usize,
    pub n_c: usize,
    pub design_rate_target: String,
    pub capacity: String,
    pub rate_below_capacity: bool,
    pub min_exact_rate: String,
    pub trials: usize,
    /// Mean symbol error over all trials (failed recoveries count as 1).
    pub symbol_error: f64,
    pub symbol_error_ci99: (f64, f64),
    pub recovered_trials: usize,
    pub recovery_frequency: f64,
    pub recovery_probability: f64,
    /// Mean symbol error over trials with full noise-space recovery.
    pub conditional_symbol_error: f64,
    /// Population-DE prediction at the realized degree sequence.
    pub de_prediction: f64,
    /// 99% binomial interval of the prediction over the decoded symbols.
    pub de_interval99: (f64, f64),
    pub within_de_interval: bool,
    pub wrong_determinations: usize,
    pub containment_violations: usize,
    pub records: Vec<TrialRecord>,
}

/// Clopper-Pearson interval for `hits` out of `n`.
pub fn clopper_pearson(hits: u64, n: u64, confidence: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let a = (1.0 - confidence) / 2.0;
    let lo = if hits == 0 {
        0.0
    } else {
        Beta::new(hits as f64, (n - hits + 1) as f64).expect("valid").inverse_cdf(a)
    };
    let hi = if hits == n {
        1.0
    } else {
        Beta::new((hits + 1) as f64, (n - hits) as f64).expect("valid").inverse_cdf(1.0 - a)
    };
    (lo, hi)
}

/// Central `confidence` interval of Bin(n, p)/n.
pub fn binomial_interval(p: f64, n: u64, confidence: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let p = p.clamp(0.0, 1.0);
    let bin = Binomial::new(p, n).expect("valid");
    let a = (1.0 - confidence) / 2.0;
    let lo = bin.inverse_cdf(a) as f64 / n as f64;
    let hi = bin.inverse_cdf(1.0 - a) as f64 / n as f64;
    (lo, hi)
}

struct Resolved {
    params: SncParams,
    k: usize,
    zero_rows: usize,
    node: crate::ensemble::NodeDegreeDistribution,
    config: DecoderConfig,
}

fn resolve(spec: &CampaignSpec) -> Result<Resolved> {
    let field = FieldSpec::new(spec.q)?;
    let params = validate_params(field, spec.n, &spec.lambda, &spec.omega)?;
    let k = match spec.k {
        Some(k) => k,
        None => channel::achievable_k(&spec.lambda, &spec.omega).ok_or_else(|| {
            Error::InvalidParams("(1-lambda)/(lambda*omega) is not an integer; pass k explicitly".into())
        })?,
    };
    let node = rho_star(k, spec.b)?.dist.to_node();
    let zero_rows = spec.zero_rows.unwrap_or(params.s);
    if spec.trials == 0 {
        return Err(Error::InvalidParams("trials must be positive".into()));
    }
    let omega_prime = Rational::new((zero_rows as i64).into(), (params.l as i64).into());
    let config = DecoderConfig {
        max_iters: spec.max_iters,
        omega_prime: (zero_rows != params.s).then_some(omega_prime),
        fail_on_span_deficiency: true,
    };
    Ok(Resolved { params, k, zero_rows, node, config })
}

fn code_for_trial(spec: &CampaignSpec, r: &Resolved, trial: usize) -> Result<LiftedCode> {
    let index = if spec.fixed_code { 0 } else { trial as u64 };
    sample_code(&r.params, &r.node, r.zero_rows, rng::derive_seed(spec.seed, index, rng::CODE))
}

fn run_trial(spec: &CampaignSpec, r: &Resolved, trial: usize, fixed: Option<&LiftedCode>) -> Result<TrialRecord> {
    let owned;
    let code = match fixed {
        Some(c) => c,
        None => {
            owned = code_for_trial(spec, r, trial)?;
            &owned
        }
    };
    let f = r.params.field;
    let mut info_rng = rng::stream(spec.seed, trial as u64, rng::INFO);
    let info: Vec<Elem> = if spec.zero_codeword {
        vec![0; code.dimension()]
    } else {
        (0..code.dimension()).map(|_| f.random(&mut info_rng)).collect()
    };
    let x = encode(code, &info)?.x;
    let mut noise_rng = rng::stream(spec.seed, trial as u64, rng::NOISE);
    let out = transmit(&x, &r.params, &mut noise_rng)?;
    let n_v = code.n_v();
    let mut contained = true;
    let base = TrialRecord {
        trial,
        code_seed: code.seed().unwrap_or_default(),
        outcome: String::new(),
        noise_space_dim: 0,
        iterations: 0,
        undetermined: n_v,
        wrong: 0,
        symbol_error: 1.0,
        truth_contained: true,
        exact_rate: code.exact_rate_string(),
        determined_per_iter: Vec::new(),
        mean_dim_per_iter: Vec::new(),
        max_dim_per_iter: Vec::new(),
    };
    match decode_with_monitor(&out.y, code, &r.config, |st| contained &= truth_contained(st, &x)) {
        Ok(res) => {
            let undetermined = res.undetermined();
            Ok(TrialRecord {
                outcome: if undetermined == 0 { "decoded" } else { "partial" }.into(),
                noise_space_dim: res.noise_space_dim,
                iterations: res.iterations_used,
                undetermined,
                wrong: wrong_determinations(&res, &x),
                symbol_error: symbol_error_rate(&res, &x),
                truth_contained: contained,
                determined_per_iter: res.stats.iter().map(|s| s.determined).collect(),
                mean_dim_per_iter: res.stats.iter().map(|s| s.mean_dim).collect(),
                max_dim_per_iter: res.stats.iter().map(|s| s.max_dim).collect(),
                ..base
            })
        }
        Err(Error::NoiseSpaceDeficient { found, .. }) => {
            Ok(TrialRecord { outcome: "span_deficient".into(), noise_space_dim: found, ..base })
        }
        Err(Error::InconsistentMessages { .. }) => {
            Ok(TrialRecord { outcome: "inconsistent".into(), truth_contained: false, ..base })
        }
        Err(e) => Err(e),
    }
}

/// A validated campaign; trials can be run in any grouping and summarized
/// once all records are in.
pub struct Campaign {
    spec: CampaignSpec,
    resolved: Resolved,
    fixed: Option<LiftedCode>,
}

impl Campaign {
    pub fn new(spec: &CampaignSpec) -> Result<Self> {
        let resolved = resolve(spec)?;
        let fixed = if spec.fixed_code { Some(code_for_trial(spec, &resolved, 0)?) } else { None };
        Ok(Campaign { spec: spec.clone(), resolved, fixed })
    }

    pub fn params(&self) -> &SncParams {
        &self.resolved.params
    }

    /// Trial `i` draws its code, information and noise from streams keyed by
    /// (seed, i), so records do not depend on grouping or thread count.
    pub fn run_trials(&self, trials: std::ops::Range<usize>) -> Result<Vec<TrialRecord>> {
        trials
            .into_par_iter()
            .map(|t| run_trial(&self.spec, &self.resolved, t, self.fixed.as_ref()))
            .collect()
    }

    pub fn log_lines(&self, records: &[TrialRecord]) -> String {
        log_lines(records, self.spec.seed, &self.resolved.params)
    }

    pub fn summarize(&self, mut records: Vec<TrialRecord>) -> Result<CampaignSummary> {
        records.sort_by_key(|r| r.trial);
        summarize(&self.spec, &self.resolved, self.fixed.as_ref(), records)
    }
}

/// Encodes, transmits and decodes `spec.trials` blocks in parallel.
pub fn run_campaign(spec: &CampaignSpec) -> Result<CampaignSummary> {
    let campaign = Campaign::new(spec)?;
    let records = campaign.run_trials(0..spec.trials)?;
    campaign.summarize(records)
}

fn summarize(
    spec: &CampaignSpec,
    r: &Resolved,
    fixed: Option<&LiftedCode>,
    records: Vec<TrialRecord>,
) -> Result<CampaignSummary> {
    if records.is_empty() {
        return Err(Error::InvalidParams("no trials to summarize".into()));
    }
    let reference = match fixed {
        Some(c) => c.clone(),
        None => code_for_trial(spec, r, 0)?,
    };
    let n_v = reference.n_v();
    let n_c = reference.n_c();
    let trials = records.len();
    let symbol_error = records.iter().map(|t| t.symbol_error).sum::<f64>() / trials as f64;
    let bad_symbols: f64 = records.iter().map(|t| t.symbol_error * n_v as f64).sum();
    let symbol_error_ci99 = clopper_pearson(bad_symbols.round() as u64, (trials * n_v) as u64, 0.99);

    let recovered: Vec<&TrialRecord> =
        records.iter().filter(|t| t.outcome == "decoded" || t.outcome == "partial").collect();
    let recovered_trials = recovered.len();
    let conditional_symbol_error = if recovered_trials == 0 {
        f64::NAN
    } else {
        recovered.iter().map(|t| t.symbol_error).sum::<f64>() / recovered_trials as f64
    };
    let recovery_probability =
        noise_recovery_probability(r.params.l, r.params.s, r.config.recovery_rows(&r.params)?, r.params.q());

    // Degree sequences are deterministic given (P, n_v), so every trial's
    // code shares the reference's edge distribution.
    let rho = reference.graph().degree_distribution()?.to_edge();
    let pop = PopulationDeConfig {
        field: r.params.field,
        m: r.params.m,
        d: r.params.s,
        rho,
        population_size: spec.pop_size,
        max_iters: spec.max_iters,
    };
    let states = population_de_run(&pop, rng::derive_seed(spec.seed, 0, rng::POPULATION))?;
    let de_prediction = predicted_symbol_error(states.last().expect("non-empty"), r.params.s, r.params.q())?;
    let de_interval99 = binomial_interval(de_prediction, (recovered_trials * n_v) as u64, 0.99);
    let within_de_interval = recovered_trials > 0
        && conditional_symbol_error >= de_interval99.0
        && conditional_symbol_error <= de_interval99.1;

    let target = crate::ensemble::design_rate(&r.params, &r.node)?;
    let capacity = r.params.capacity();
    let min_exact_rate = records
        .iter()
        .map(|t| rational::parse(&t.exact_rate).expect("formatted by us"))
        .min()
        .unwrap_or_else(|| exact_rate(&reference));

    Ok(CampaignSummary {
        params: r.params.clone(),
        spec: spec.clone(),
        k: r.k,
        zero_rows: r.zero_rows,
        n_v,
        n_c,
        design_rate_target: rational::format(&target),
        capacity: rational::format(&capacity),
        rate_below_capacity: target < capacity,
        min_exact_rate: rational::format(&min_exact_rate),
        trials,
        symbol_error,
        symbol_error_ci99,
        recovered_trials,
        recovery_frequency: recovered_trials as f64 / trials as f64,
        recovery_probability,
        conditional_symbol_error,
        de_prediction,
        de_interval99,
        within_de_interval,
        wrong_determinations: records.iter().map(|t| t.wrong).sum(),
        containment_violations: records.iter().filter(|t| !t.truth_contained).count(),
        records,
    })
}

/// One JSON object per trial, with the seed and resolved parameters.
fn log_lines(records: &[TrialRecord], seed: u64, params: &SncParams) -> String {
    let mut out = String::new();
    for r in records {
        let mut v = serde_json::to_value(r).expect("record serializes");
        v["seed"] = json!(seed);
        v["params"] = serde_json::to_value(params).expect("params serialize");
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}

pub fn trial_log_jsonl(summary: &CampaignSummary) -> String {
    log_lines(&summary.records, summary.spec.seed, &summary.params)
}

pub const SUMMARY_HEADER: &str = "trials,n_v,n_c,design_rate,min_exact_rate,capacity,symbol_error,ci99_lo,ci99_hi,recovered,recovery_frequency,recovery_probability,conditional_symbol_error,de_prediction,de_lo,de_hi,within_de_interval,wrong_determinations,containment_violations";

pub fn summary_csv(s: &CampaignSummary) -> String {
    let p = &s.params;
    let mut out = format!(
        "# schema=simulate-summary/v1 q={} N={} lambda={} omega={} l={} m={} s={} k={} b={} zero_rows={} trials={} iters={} pop_size={} seed={} fixed_code={} zero_codeword={}\n",
        p.q(),
        p.n,
        rational::format(&p.lambda),
        rational::format(&p.omega),
        p.l,
        p.m,
        p.s,
        s.k,
        s.spec.b,
        s.zero_rows,
        s.spec.trials,
        s.spec.max_iters,
        s.spec.pop_size,
        s.spec.seed,
        s.spec.fixed_code,
        s.spec.zero_codeword
    );
    if !s.rate_below_capacity {
        out.push_str("# warning: design rate is not below capacity\n");
    }
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        s.trials,
        s.n_v,
        s.n_c,
        s.design_rate_target,
        s.min_exact_rate,
        s.capacity,
        fmt(s.symbol_error),
        fmt(s.symbol_error_ci99.0),
        fmt(s.symbol_error_ci99.1),
        s.recovered_trials,
        fmt(s.recovery_frequency),
        fmt(s.recovery_probability),
        fmt(s.conditional_symbol_error),
        fmt(s.de_prediction),
        fmt(s.de_interval99.0),
        fmt(s.de_interval99.1),
        s.within_de_interval,
        s.wrong_determinations,
        s.containment_violations
    );
    out
}

// ------------------------------------------------------------------ oracles

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub name: String,
    pub cases: usize,
    pub passed: bool,
    pub failures: Vec<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notes: Option<serde_json::Value>,
}

/// exact_rank_count against enumeration for all s ≤ min(l,m), l,m ≤ `max_dim`.
pub fn rank_count_oracle(max_dim: usize, qs: &[u32]) -> Result<OracleReport> {
    let mut cases = 0;
    let mut failures = Vec::new();
    for &q in qs {
        for l in 1..=max_dim {
            for m in 1..=max_dim {
                let hist = channel::rank_histogram(l, m, q)?;
                for (s, count) in hist.iter().enumerate() {
                    cases += 1;
                    let exact = channel::exact_rank_count(s, l, m, q)?;
                    if exact != *count {
                        failures.push(json!({"q": q, "l": l, "m": m, "s": s,
                            "exact": exact.to_string(), "enumerated": count.to_string()}));
                    }
                }
            }
        }
    }
    Ok(OracleReport { name: "rank-count".into(), cases, passed: failures.is_empty(), failures, notes: None })
}

fn random_affine<R: Rng>(field: FieldSpec, m: usize, rng: &mut R) -> Result<AffineSubspace> {
    let d = rng.random_range(0..=m);
    let dir = Subspace::random(field, m, d, rng)?;
    let offset: Vec<Elem> = (0..m).map(|_| field.random(rng)).collect();
    AffineSubspace::new(offset, dir)
}

fn element_set(a: &AffineSubspace) -> BTreeSet<Vec<Elem>> {
    a.elements().into_iter().collect()
}

/// Coset enumeration against affine sum, intersection and image.
pub fn subspace_oracle(max_m: usize, q: u32, cases: usize, seed: u64) -> Result<OracleReport> {
    let field = FieldSpec::new(q)?;
    let mut failures = Vec::new();
    for c in 0..cases {
        let mut rng = rng::stream(seed, c as u64, rng::DEVIATION);
        let m = rng.random_range(1..=max_m);
        let a = random_affine(field, m, &mut rng)?;
        let b = random_affine(field, m, &mut rng)?;
        let h = Matrix::random_invertible(m, field, &mut rng)?;
        let (ea, eb) = (element_set(&a), element_set(&b));

        let sum: BTreeSet<Vec<Elem>> = ea
            .iter()
            .flat_map(|u| eb.iter().map(move |v| u.iter().zip(v).map(|(&x, &y)| field.add(x, y)).collect()))
            .collect();
        let inter: BTreeSet<Vec<Elem>> = ea.intersection(&eb).cloned().collect();
        let image: BTreeSet<Vec<Elem>> = ea.iter().map(|u| h.left_mul_vec(u)).collect();

        let got_sum = element_set(&a.sum(&b)?);
        let got_inter = a.intersection(&b)?.map(|x| element_set(&x)).unwrap_or_default();
        let got_image = element_set(&a.image(&h)?);
        let canonical = a.contains(a.offset())
            && AffineSubspace::new(ea.iter().next_back().cloned().unwrap_or_default(), a.direction().clone())? == a;
        if sum != got_sum || inter != got_inter || image != got_image || !canonical {
            failures.push(json!({"case": c, "m": m, "a": format!("{a:?}"), "b": format!("{b:?}")}));
        }
    }
    Ok(OracleReport { name: "subspace-ops".into(), cases, passed: failures.is_empty(), failures, notes: None })
}

/// The deviation-bound grid: every (m ≤ max_m, d1, d2 ≤ m, slack ≤ max_slack, q).
/// `passed` requires the stated bound and the floor in every cell; the
/// Markov bound with the exact mean is reported alongside.
pub fn deviation_oracle(max_m: usize, max_slack: usize, qs: &[u32], trials: usize, seed: u64) -> Result<OracleReport> {
    let mut cells = Vec::new();
    for &q in qs {
        for m in 1..=max_m {
            for d1 in 0..=m {
                for d2 in 0..=m {
                    for slack in 0..=max_slack {
                        cells.push((q, m, d1, d2, slack));
                    }
                }
            }
        }
    }
    let reports = cells
        .par_iter()
        .enumerate()
        .map(|(i, &(q, m, d1, d2, slack))| {
            density::deviation_bound_check(m, d1, d2, slack, trials, q, rng::derive_seed(seed, i as u64, rng::DEVIATION))
        })
        .collect::<Result<Vec<_>>>()?;
    let stated_fail: Vec<_> = reports.iter().filter(|r| !r.stated_ok).collect();
    let markov_fail = reports.iter().filter(|r| !r.markov_ok).count();
    let floor_fail = reports.iter().filter(|r| !r.floor_ok).count();
    let failures = stated_fail
        .iter()
        .take(20)
        .map(|r| serde_json::to_value(r).expect("report serializes"))
        .collect();
    Ok(OracleReport {
        name: "deviation-bound".into(),
        cases: reports.len(),
        passed: stated_fail.is_empty() && floor_fail == 0,
        failures,
        notes: Some(json!({
            "stated_bound_violations": stated_fail.len(),
            "markov_bound_violations": markov_fail,
            "floor_violations": floor_fail,
            "trials_per_cell": trials,
        })),
    })
}
