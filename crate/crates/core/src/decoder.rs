//! Message passing with affine subspaces.
//!
//! Each directed edge i→a carries a coset of (F_q)^m known to contain the
//! true row x_i. A check ā forces x_i = -(Σ_{j∈∂ā∖i} x_j h_{j,ā}) h_{i,ā}^{-1},
//! so the message towards the other check a is refined to
//! (y_i + W) ∩ -(Σ W_{j→ā} h_{j,ā}) h_{i,ā}^{-1}.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::SncParams;
use crate::ensemble::LiftedCode;
use crate::error::{Error, Result};
use crate::field::Elem;
use crate::matrix::Matrix;
use crate::rational::{self, int, Rational};
use crate::subspace::{AffineSubspace, Subspace};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub max_iters: usize,
    /// Fraction of trailing rows used to recover the noise space; `None`
    /// means ω.
    #[serde(with = "opt_rational")]
    pub omega_prime: Option<Rational>,
    pub fail_on_span_deficiency: bool,
}

mod opt_rational {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
        r.as_ref().map(rational::format).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Rational>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| rational::parse(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig { max_iters: 50, omega_prime: None, fail_on_span_deficiency: true }
    }
}

impl DecoderConfig {
    /// Number of trailing rows of y inspected, ℓω'.
    pub fn recovery_rows(&self, params: &SncParams) -> Result<usize> {
        let Some(wp) = &self.omega_prime else {
            return Ok(params.s);
        };
        if *wp < params.omega || *wp >= int(1) {
            return Err(Error::InvalidParams(format!(
                "omega' = {} must lie in [omega, 1) = [{}, 1)",
                rational::format(wp),
                rational::format(&params.omega)
            )));
        }
        rational::as_usize(&(wp * int(params.l as i64)))
            .ok_or_else(|| Error::InvalidParams(format!("l*omega' = {}*{} is not an integer", params.l, rational::format(wp))))
    }

    fn validate(&self, code: &LiftedCode) -> Result<usize> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParams("max_iters must be at least 1".into()));
        }
        let r = self.recovery_rows(code.params())?;
        if r > code.zero_rows() {
            return Err(Error::InvalidParams(format!(
                "l*omega' = {r} rows exceed the {} zero rows of the code",
                code.zero_rows()
            )));
        }
        Ok(r)
    }
}

/// Row space of the trailing `rows` rows of `y`. Fails with
/// [`Error::NoiseSpaceDeficient`] when it has dimension below s and
/// `fail_on_span_deficiency` is set.
pub fn recover_noise_space(y: &Matrix, params: &SncParams, config: &DecoderConfig) -> Result<Subspace> {
    let rows = config.recovery_rows(params)?;
    if y.rows() != params.l || y.cols() != params.m {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} received matrix", params.l, params.m),
            got: format!("{}x{}", y.rows(), y.cols()),
        });
    }
    let w = y.row_block(params.l - rows..params.l).row_space();
    if w.dim() < params.s && config.fail_on_span_deficiency {
        return Err(Error::NoiseSpaceDeficient { found: w.dim(), expected: params.s });
    }
    Ok(w)
}

/// Variable-to-check messages, one per edge (edge ids as in the graph).
/// Check-to-variable messages coincide with them and are not stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageState {
    pub t: usize,
    pub priors: Vec<AffineSubspace>,
    pub messages: Vec<AffineSubspace>,
}

impl MessageState {
    pub fn max_dim(&self) -> usize {
        self.messages.iter().map(|m| m.dim()).max().unwrap_or(0)
    }

    pub fn mean_dim(&self) -> f64 {
        if self.messages.is_empty() {
            return 0.0;
        }
        self.messages.iter().map(|m| m.dim()).sum::<usize>() as f64 / self.messages.len() as f64
    }
}

/// W^(0)_{i→a} = y_i + W on every edge.
pub fn init_messages(y: &Matrix, w: &Subspace, code: &LiftedCode) -> Result<MessageState> {
    let priors = (0..code.n_v())
        .map(|i| AffineSubspace::new(y.row(i).to_vec(), w.clone()))
        .collect::<Result<Vec<_>>>()?;
    let messages = (0..2 * code.n_v()).map(|e| priors[e / 2].clone()).collect();
    Ok(MessageState { t: 0, priors, messages })
}

/// One flooding round: every edge is updated from the round-t messages.
pub fn iterate(state: &MessageState, code: &LiftedCode) -> Result<MessageState> {
    let g = code.graph();
    let f = code.params().field;
    let m = code.params().m;
    let next_t = state.t + 1;

    // For each check, the outgoing proposal towards every incident edge's
    // variable, already mapped back through that edge's inverse label.
    let per_check: Vec<Vec<(usize, AffineSubspace)>> = (0..g.n_c())
        .into_par_iter()
        .map(|a| {
            let edges = g.check_edges(a);
            let images: Vec<AffineSubspace> = edges
                .iter()
                .map(|&f_e| state.messages[f_e].image_by_invertible(code.label(f_e)))
                .collect::<Vec<_>>();
            edges
                .iter()
                .enumerate()
                .map(|(pos, &e_bar)| {
                    let mut acc = AffineSubspace::point(f, vec![0 as Elem; m]);
                    for (other, img) in images.iter().enumerate() {
                        if other != pos {
                            acc = acc.sum(img).expect("same ambient");
                        }
                    }
                    (e_bar, acc.negate().image_by_invertible(code.label_inverse(e_bar)))
                })
                .collect()
        })
        .collect();

    let mut proposals: Vec<Option<AffineSubspace>> = vec![None; 2 * code.n_v()];
    for list in per_check {
        for (e_bar, prop) in list {
            proposals[e_bar] = Some(prop);
        }
    }

    // Edge e = (i→a) receives the proposal computed at the sibling's check ā.
    let messages = (0..2 * code.n_v())
        .into_par_iter()
        .map(|e| {
            let prop = proposals[g.sibling(e)].as_ref().expect("every edge has a proposal");
            state.priors[e / 2]
                .intersection(prop)?
                .ok_or(Error::InconsistentMessages { edge: e, iteration: next_t })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MessageState { t: next_t, priors: state.priors.clone(), messages })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub t: usize,
    pub mean_dim: f64,
    pub max_dim: usize,
    pub determined: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    /// Estimated codeword; undetermined rows are zero and masked out.
    pub x_hat: Matrix,
    pub determined: Vec<bool>,
    pub n_v: usize,
    pub iterations_used: usize,
    pub stats: Vec<IterationStats>,
    pub noise_space_ok: bool,
    pub noise_space_dim: usize,
}

impl DecodeResult {
    pub fn undetermined(&self) -> usize {
        self.determined[..self.n_v].iter().filter(|&&d| !d).count()
    }

    pub fn all_determined(&self) -> bool {
        self.undetermined() == 0
    }
}

/// Per-variable decisions: the unique point of W_{i→a} ∩ W_{i→ā}, if any.
fn decisions(state: &MessageState) -> Result<Vec<Option<Vec<Elem>>>> {
    let n_v = state.priors.len();
    (0..n_v)
        .into_par_iter()
        .map(|i| {
            let both = state.messages[2 * i]
                .intersection(&state.messages[2 * i + 1])?
                .ok_or(Error::InconsistentMessages { edge: 2 * i, iteration: state.t })?;
            Ok(both.as_point().map(|p| p.to_vec()))
        })
        .collect()
}

/// Row i is determined iff its two messages meet in a single point; the
/// trailing zero rows are always determined.
pub fn decide(state: &MessageState, code: &LiftedCode) -> Result<DecodeResult> {
    let p = code.params();
    let n_v = code.n_v();
    let mut x_hat = Matrix::zeros(p.field, p.l, p.m);
    let mut determined = vec![true; p.l];
    for (i, d) in decisions(state)?.into_iter().enumerate() {
        match d {
            Some(row) => x_hat.row_mut(i).copy_from_slice(&row),
            None => determined[i] = false,
        }
    }
    let count = determined[..n_v].iter().filter(|&&d| d).count();
    Ok(DecodeResult {
        x_hat,
        determined,
        n_v,
        iterations_used: state.t,
        stats: vec![IterationStats { t: state.t, mean_dim: state.mean_dim(), max_dim: state.max_dim(), determined: count }],
        noise_space_ok: true,
        noise_space_dim: 0,
    })
}

/// Full pipeline: noise-space recovery, initialization, rounds until every
/// row is determined, a fixed point is reached, or `max_iters` rounds ran.
pub fn decode(y: &Matrix, code: &LiftedCode, config: &DecoderConfig) -> Result<DecodeResult> {
    decode_with_monitor(y, code, config, |_| {})
}

/// [`decode`], calling `monitor` on the initial state and after every round.
pub fn decode_with_monitor<F: FnMut(&MessageState)>(
    y: &Matrix,
    code: &LiftedCode,
    config: &DecoderConfig,
    mut monitor: F,
) -> Result<DecodeResult> {
    config.validate(code)?;
    let params = code.params();
    let w = recover_noise_space(y, params, config)?;
    let mut state = init_messages(y, &w, code)?;
    monitor(&state);
    let mut stats = Vec::new();
    let mut result = decide(&state, code)?;
    stats.append(&mut result.stats);
    while state.t < config.max_iters && !result.all_determined() {
        let next = iterate(&state, code)?;
        monitor(&next);
        let unchanged = next.messages == state.messages;
        state = next;
        result = decide(&state, code)?;
        stats.append(&mut result.stats);
        if unchanged {
            break;
        }
    }
    result.stats = stats;
    result.noise_space_ok = w.dim() == params.s;
    result.noise_space_dim = w.dim();
    Ok(result)
}

/// Fraction of the n_v variable rows that are undetermined or wrong.
pub fn symbol_error_rate(result: &DecodeResult, truth_x: &Matrix) -> f64 {
    if result.n_v == 0 {
        return 0.0;
    }
    let bad = (0..result.n_v)
        .filter(|&i| !result.determined[i] || result.x_hat.row(i) != truth_x.row(i))
        .count();
    bad as f64 / result.n_v as f64
}

/// Determined rows that disagree with the truth.
pub fn wrong_determinations(result: &DecodeResult, truth_x: &Matrix) -> usize {
    (0..result.determined.len())
        .filter(|&i| result.determined[i] && result.x_hat.row(i) != truth_x.row(i))
        .count()
}

/// Whether every message still contains the true row.
pub fn truth_contained(state: &MessageState, truth_x: &Matrix) -> bool {
    state.messages.iter().enumerate().all(|(e, msg)| msg.contains(truth_x.row(e / 2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{transmit, validate_params};
    use crate::ensemble::graph::{Edge, TannerGraph};
    use crate::ensemble::{encode, lift, rho_star, sample_code};
    use crate::field::FieldSpec;
    use crate::rational::ratio;
    use crate::rng;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn code_for(q: u32, n: usize, seed: u64) -> LiftedCode {
        let params = validate_params(FieldSpec::new(q).unwrap(), n, &ratio(1, 2), &ratio(1, 3)).unwrap();
        let p = rho_star(3, 6).unwrap().dist.to_node();
        sample_code(&params, &p, params.s, seed).unwrap()
    }

    fn random_codeword<R: Rng>(code: &LiftedCode, rng: &mut R) -> Matrix {
        let f = code.params().field;
        let info: Vec<Elem> = (0..code.dimension()).map(|_| f.random(rng)).collect();
        encode(code, &info).unwrap().x
    }

    #[test]
    fn noiseless_decodes_at_start() {
        let params = validate_params(FieldSpec::new(3).unwrap(), 24, &ratio(1, 2), &int(0)).unwrap();
        let p = rho_star(3, 6).unwrap().dist.to_node();
        let code = sample_code(&params, &p, 4, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_codeword(&code, &mut rng);
        let out = transmit(&x, &params, &mut rng).unwrap();
        let config = DecoderConfig { omega_prime: Some(ratio(1, 3)), ..Default::default() };
        let res = decode(&out.y, &code, &config).unwrap();
        assert_eq!(res.iterations_used, 0);
        assert!(res.all_determined());
        assert_eq!(res.x_hat, x);
        assert_eq!(symbol_error_rate(&res, &x), 0.0);
    }

    #[test]
    fn soundness_and_containment() {
        for q in [2u32, 3] {
            let code = code_for(q, 24, q as u64);
            let mut decoded = 0;
            for trial in 0..60 {
                let mut rng = rng::stream(100 + q as u64, trial, rng::NOISE);
                let x = random_codeword(&code, &mut rng);
                let out = transmit(&x, code.params(), &mut rng).unwrap();
                let config = DecoderConfig::default();
                let lax = DecoderConfig { fail_on_span_deficiency: false, ..Default::default() };
                let w = recover_noise_space(&out.y, code.params(), &lax).unwrap();
                assert!(w.is_subspace_of(&out.truth.as_ref().unwrap().noise_space));
                if w.dim() < code.params().s {
                    continue;
                }
                let mut contained = true;
                let res = decode_with_monitor(&out.y, &code, &config, |st| {
                    contained &= truth_contained(st, &x);
                    assert!(st.max_dim() <= w.dim());
                })
                .unwrap();
                assert!(contained);
                assert_eq!(wrong_determinations(&res, &x), 0);
                let determined: Vec<usize> = res.stats.iter().map(|s| s.determined).collect();
                assert!(determined.windows(2).all(|p| p[0] <= p[1]));
                decoded += 1;
            }
            assert!(decoded >= 10, "{decoded}");
        }
    }

    #[test]
    fn deficient_span_is_reported() {
        let code = code_for(2, 24, 4);
        let params = code.params().clone();
        let mut found = false;
        for trial in 0..40 {
            let mut rng = rng::stream(5, trial, rng::NOISE);
            let x = Matrix::zeros(params.field, params.l, params.m);
            let out = transmit(&x, &params, &mut rng).unwrap();
            let strict = decode(&out.y, &code, &DecoderConfig::default());
            if let Err(Error::NoiseSpaceDeficient { found: d, expected }) = strict {
                assert!(d < expected);
                // Proceeding anyway leaves the truth outside y_i + W, so the
                // run may end in an empty intersection.
                let lax = DecoderConfig { fail_on_span_deficiency: false, ..Default::default() };
                match decode(&out.y, &code, &lax) {
                    Ok(res) => assert!(!res.noise_space_ok && res.noise_space_dim == d),
                    Err(e) => assert!(matches!(e, Error::InconsistentMessages { .. })),
                }
                found = true;
            }
        }
        assert!(found);
    }

    #[test]
    fn omega_prime_validation() {
        let code = code_for(2, 24, 4);
        let bad = DecoderConfig { omega_prime: Some(ratio(1, 2)), ..Default::default() };
        let y = Matrix::zeros(code.params().field, 12, 12);
        assert!(decode(&y, &code, &bad).is_err());
        let low = DecoderConfig { omega_prime: Some(ratio(1, 4)), ..Default::default() };
        assert!(decode(&y, &code, &low).is_err());
        let zero_iters = DecoderConfig { max_iters: 0, ..Default::default() };
        assert!(decode(&y, &code, &zero_iters).is_err());
    }

    #[test]
    fn determinism() {
        let code = code_for(3, 24, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_codeword(&code, &mut rng);
        let out = transmit(&x, code.params(), &mut rng).unwrap();
        let config = DecoderConfig { fail_on_span_deficiency: false, ..Default::default() };
        assert_eq!(decode(&out.y, &code, &config), decode(&out.y, &code, &config));
    }

    #[test]
    fn codeword_shift_symmetry() {
        // Same noise on the zero codeword and on a random codeword gives the
        // same undetermined pattern.
        for q in [2u32, 3] {
            let code = code_for(q, 24, 20 + q as u64);
            let params = code.params().clone();
            let config = DecoderConfig::default();
            let mut compared = 0;
            for trial in 0..40 {
                let mut rng = rng::stream(30, trial, rng::NOISE);
                let z = Matrix::random_rank(params.l, params.m, params.s, params.field, &mut rng).unwrap();
                let x = random_codeword(&code, &mut rng);
                match (decode(&z, &code, &config), decode(&x.add(&z).unwrap(), &code, &config)) {
                    (Ok(a), Ok(b)) => {
                        assert_eq!(a.determined, b.determined);
                        assert_eq!(a.stats, b.stats);
                        compared += 1;
                    }
                    (Err(a), Err(b)) => assert_eq!(a, b),
                    _ => panic!("outcomes differ"),
                }
            }
            assert!(compared > 0);
        }
    }

    #[test]
    fn zero_noise_space_is_a_fixed_point() {
        let code = code_for(2, 24, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_codeword(&code, &mut rng);
        let w = Subspace::zero(code.params().field, code.params().m);
        let st = init_messages(&x, &w, &code).unwrap();
        assert!(st.messages.iter().all(|m| m.dim() == 0));
        let next = iterate(&st, &code).unwrap();
        assert_eq!(next.messages, st.messages);
        let res = decide(&st, &code).unwrap();
        assert!(res.all_determined());
    }

    #[test]
    fn degree_two_check_by_hand() {
        // Variables 0 and 1 share checks 0 and 1 with identity labels, q=2,
        // m=2, W = span{e1}.
        let f = FieldSpec::binary();
        let params = validate_params(f, 6, &ratio(2, 3), &ratio(1, 2)).unwrap();
        assert_eq!((params.l, params.m, params.s), (4, 2, 2));
        let edges = vec![
            Edge { var: 0, check: 0, slot: 0 },
            Edge { var: 0, check: 1, slot: 0 },
            Edge { var: 1, check: 0, slot: 1 },
            Edge { var: 1, check: 1, slot: 1 },
        ];
        let graph = TannerGraph::from_edges(2, vec![2, 2], edges).unwrap();
        let code = crate::ensemble::LiftedCode::from_parts(
            params.clone(),
            graph,
            vec![Matrix::identity(f, 2); 4],
            None,
        )
        .unwrap();
        let w = Matrix::from_rows(f, &[[1u64, 0]]).unwrap().row_space();

        let y = Matrix::zeros(f, 4, 2);
        let st = init_messages(&y, &w, &code).unwrap();
        let next = iterate(&st, &code).unwrap();
        assert_eq!(next.messages, st.messages);

        let mut y2 = Matrix::zeros(f, 4, 2);
        y2.set(1, 1, 1);
        let st = init_messages(&y2, &w, &code).unwrap();
        assert!(iterate(&st, &code).is_err());

        // y_1 in W: the shifted coset coincides and nothing narrows.
        let mut y3 = Matrix::zeros(f, 4, 2);
        y3.set(1, 0, 1);
        let st = init_messages(&y3, &w, &code).unwrap();
        let next = iterate(&st, &code).unwrap();
        assert!(next.messages.iter().all(|m| m.dim() == 1));
    }

    #[test]
    fn degree_one_check_pins_row() {
        // Variable 0 touches a degree-1 check, so its row is forced to 0.
        let f = FieldSpec::new(3).unwrap();
        let params = validate_params(f, 6, &ratio(2, 3), &ratio(1, 2)).unwrap();
        let edges = vec![
            Edge { var: 0, check: 0, slot: 0 },
            Edge { var: 0, check: 1, slot: 0 },
            Edge { var: 1, check: 1, slot: 1 },
            Edge { var: 1, check: 2, slot: 0 },
        ];
        let graph = TannerGraph::from_edges(2, vec![1, 2, 1], edges).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let code = lift(graph, &params, &mut rng).unwrap();
        assert_eq!(code.dimension(), 0);
        let mut z = Matrix::random_rank(4, 2, 2, f, &mut rng).unwrap();
        // Keep the noise inside the zero block rows too.
        for c in 0..2 {
            z.set(2, c, if c == 0 { 1 } else { 0 });
            z.set(3, c, if c == 1 { 1 } else { 0 });
        }
        let res = decode(&z, &code, &DecoderConfig::default()).unwrap();
        assert!(res.all_determined());
        assert!(res.x_hat.is_zero());
    }
}
