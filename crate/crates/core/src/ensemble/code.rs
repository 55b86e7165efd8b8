//! Lifted codes: every edge of a Tanner graph carries an invertible m×m
//! label, and codeword rows satisfy Σ_{i∈∂a} x_i h_{i,a} = 0 at each check.

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::degree::NodeDegreeDistribution;
use super::graph::{realize_degree_sequence, sample_tanner_graph, TannerGraph};
use crate::channel::SncParams;
use crate::error::{Error, Result};
use crate::field::Elem;
use crate::matrix::Matrix;
use crate::rational::{self, int, ratio, Rational};
use crate::rng;

/// Row-reduced lifted system, cached per code.
#[derive(Clone, Debug)]
struct EncoderSystem {
    reduced: Matrix,
    pivots: Vec<usize>,
    free: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(try_from = "CodeRecord", into = "CodeRecord")]
pub struct LiftedCode {
    params: SncParams,
    zero_rows: usize,
    graph: TannerGraph,
    labels: Vec<Matrix>,
    inverses: Vec<Matrix>,
    design_rate: Rational,
    seed: Option<u64>,
    system: OnceLock<EncoderSystem>,
}

/// Serialized form of a [`LiftedCode`].
#[derive(Clone, Debug, Serialize, Deserialize)]
struct CodeRecord {
    params: SncParams,
    zero_rows: usize,
    graph: TannerGraph,
    labels: Vec<Matrix>,
    seed: Option<u64>,
}

impl TryFrom<CodeRecord> for LiftedCode {
    type Error = Error;
    fn try_from(r: CodeRecord) -> Result<Self> {
        LiftedCode::from_parts(r.params, r.graph, r.labels, r.seed)
    }
}

impl From<LiftedCode> for CodeRecord {
    fn from(c: LiftedCode) -> Self {
        CodeRecord { params: c.params, zero_rows: c.zero_rows, graph: c.graph, labels: c.labels, seed: c.seed }
    }
}

impl Clone for LiftedCode {
    fn clone(&self) -> Self {
        LiftedCode {
            params: self.params.clone(),
            zero_rows: self.zero_rows,
            graph: self.graph.clone(),
            labels: self.labels.clone(),
            inverses: self.inverses.clone(),
            design_rate: self.design_rate.clone(),
            seed: self.seed,
            system: self.system.clone(),
        }
    }
}

impl PartialEq for LiftedCode {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.zero_rows == other.zero_rows
            && self.graph == other.graph
            && self.labels == other.labels
            && self.seed == other.seed
    }
}

impl Eq for LiftedCode {}

impl LiftedCode {
    /// Assembles a code from a graph and explicit labels (one per edge).
    pub fn from_parts(params: SncParams, graph: TannerGraph, labels: Vec<Matrix>, seed: Option<u64>) -> Result<Self> {
        if graph.n_v() > params.l {
            return Err(Error::ShapeMismatch {
                expected: format!("at most l = {} variables", params.l),
                got: format!("{}", graph.n_v()),
            });
        }
        let zero_rows = params.l - graph.n_v();
        if zero_rows < params.s {
            return Err(Error::InvalidParams(format!(
                "{} variables leave {zero_rows} zero rows, fewer than s = {}",
                graph.n_v(),
                params.s
            )));
        }
        if labels.len() != graph.edges().len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} labels", graph.edges().len()),
                got: format!("{}", labels.len()),
            });
        }
        let mut inverses = Vec::with_capacity(labels.len());
        for h in &labels {
            if h.rows() != params.m || h.cols() != params.m || h.field() != params.field {
                return Err(Error::ShapeMismatch {
                    expected: format!("{0}x{0} labels over F_{1}", params.m, params.q()),
                    got: format!("{}x{} over F_{}", h.rows(), h.cols(), h.field().q()),
                });
            }
            inverses.push(h.inverse()?);
        }
        let design_rate = (int(1) - &params.lambda)
            * ratio(graph.n_v() as i64 - graph.n_c() as i64, params.l as i64);
        Ok(LiftedCode {
            params,
            zero_rows,
            graph,
            labels,
            inverses,
            design_rate,
            seed,
            system: OnceLock::new(),
        })
    }

    pub fn params(&self) -> &SncParams {
        &self.params
    }

    /// Trailing all-zero rows of every codeword (ℓω' ≥ s).
    pub fn zero_rows(&self) -> usize {
        self.zero_rows
    }

    pub fn graph(&self) -> &TannerGraph {
        &self.graph
    }

    pub fn n_v(&self) -> usize {
        self.graph.n_v()
    }

    pub fn n_c(&self) -> usize {
        self.graph.n_c()
    }

    pub fn label(&self, edge: usize) -> &Matrix {
        &self.labels[edge]
    }

    pub fn label_inverse(&self, edge: usize) -> &Matrix {
        &self.inverses[edge]
    }

    pub fn labels(&self) -> &[Matrix] {
        &self.labels
    }

    /// (1-λ)(n_v - n_c)/ℓ: the rate bound at the realized degree sequence.
    pub fn design_rate(&self) -> &Rational {
        &self.design_rate
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// The (n_c·m) × (n_v·m) system over the unknowns x_i[r] at column i·m + r.
    pub fn lifted_system(&self) -> Matrix {
        let m = self.params.m;
        let mut sys = Matrix::zeros(self.params.field, self.n_c() * m, self.n_v() * m);
        for (e, edge) in self.graph.edges().iter().enumerate() {
            let h = &self.labels[e];
            for r in 0..m {
                for c in 0..m {
                    sys.set(edge.check * m + c, edge.var * m + r, h.get(r, c));
                }
            }
        }
        sys
    }

    fn system(&self) -> &EncoderSystem {
        self.system.get_or_init(|| {
            let mut sys = self.lifted_system();
            let (rank, pivots) = sys.rref_in_place();
            let n = sys.cols();
            let mut is_pivot = vec![false; n];
            for &p in &pivots {
                is_pivot[p] = true;
            }
            let free = (0..n).filter(|&c| !is_pivot[c]).collect();
            EncoderSystem { reduced: sys.row_block(0..rank), pivots, free }
        })
    }

    pub fn rank(&self) -> usize {
        self.system().pivots.len()
    }

    /// Number of information symbols, n_v·m - rank.
    pub fn dimension(&self) -> usize {
        self.system().free.len()
    }

    /// Information positions as (row, column) of the codeword matrix.
    pub fn info_positions(&self) -> Vec<(usize, usize)> {
        let m = self.params.m;
        self.system().free.iter().map(|&j| (j / m, j % m)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("code serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// A codeword: ℓ×m matrix whose trailing `zero_rows` rows vanish.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codeword {
    pub x: Matrix,
}

/// Attaches independent uniform GL_m labels to every edge.
pub fn lift<R: Rng + ?Sized>(graph: TannerGraph, params: &SncParams, rng: &mut R) -> Result<LiftedCode> {
    let labels = (0..graph.edges().len())
        .map(|_| Matrix::random_invertible(params.m, params.field, rng))
        .collect::<Result<Vec<_>>>()?;
    LiftedCode::from_parts(params.clone(), graph, labels, None)
}

/// Realizes `p` on ℓ - `zero_rows` variables, samples a graph and lifts it,
/// all from one seed.
pub fn sample_code(params: &SncParams, p: &NodeDegreeDistribution, zero_rows: usize, seed: u64) -> Result<LiftedCode> {
    if zero_rows > params.l || zero_rows < params.s {
        return Err(Error::InvalidParams(format!(
            "zero_rows = {zero_rows} must lie in [s, l] = [{}, {}]",
            params.s, params.l
        )));
    }
    let n_v = params.l - zero_rows;
    let mut rng = rng::stream(seed, 0, rng::CODE);
    let degrees = realize_degree_sequence(p, n_v)?;
    let graph = sample_tanner_graph(&degrees, n_v, &mut rng)?;
    let mut code = lift(graph, params, &mut rng)?;
    code.seed = Some(seed);
    Ok(code)
}

/// Maps `info` (length [`LiftedCode::dimension`]) to a codeword. Info fills
/// the non-pivot columns of the reduced system; pivots follow by
/// back-substitution.
pub fn encode(code: &LiftedCode, info: &[Elem]) -> Result<Codeword> {
    let sys = code.system();
    if info.len() != sys.free.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} information symbols", sys.free.len()),
            got: format!("{}", info.len()),
        });
    }
    let p = code.params();
    let f = p.field;
    let mut flat = vec![0 as Elem; code.n_v() * p.m];
    for (&j, &v) in sys.free.iter().zip(info) {
        flat[j] = f.check(v as u64)?;
    }
    for (r, &piv) in sys.pivots.iter().enumerate() {
        let row = sys.reduced.row(r);
        let acc = sys.free.iter().fold(0, |acc, &j| f.add(acc, f.mul(row[j], flat[j])));
        flat[piv] = f.neg(acc);
    }
    flat.resize(p.l * p.m, 0);
    Ok(Codeword { x: Matrix::from_vec(f, p.l, p.m, flat)? })
}

/// log_q|C| / (Nℓ), from the rank of the lifted system.
pub fn exact_rate(code: &LiftedCode) -> Rational {
    ratio(code.dimension() as i64, code.params().block_symbols() as i64)
}

pub fn check_satisfied(code: &LiftedCode, x: &Matrix) -> Result<bool> {
    let p = code.params();
    if x.rows() != p.l || x.cols() != p.m || x.field() != p.field {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} matrix", p.l, p.m),
            got: format!("{}x{}", x.rows(), x.cols()),
        });
    }
    if (code.n_v()..p.l).any(|r| x.row(r).iter().any(|&v| v != 0)) {
        return Ok(false);
    }
    let f = p.field;
    let g = code.graph();
    for a in 0..g.n_c() {
        let mut acc = vec![0 as Elem; p.m];
        for &e in g.check_edges(a) {
            let term = code.label(e).left_mul_vec(x.row(g.edge(e).var));
            f.axpy(&mut acc, 1, &term);
        }
        if acc.iter().any(|&v| v != 0) {
            return Ok(false);
        }
    }
    Ok(true)
}

impl LiftedCode {
    /// Rational form of the rate, for reports.
    pub fn exact_rate_string(&self) -> String {
        rational::format(&exact_rate(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::validate_params;
    use crate::ensemble::degree::{design_rate, rho_star};
    use crate::ensemble::graph::Edge;
    use crate::field::FieldSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_code(q: u32, seed: u64) -> LiftedCode {
        let params = validate_params(FieldSpec::new(q).unwrap(), 24, &ratio(1, 2), &ratio(1, 3)).unwrap();
        let p = rho_star(3, 6).unwrap().dist.to_node();
        sample_code(&params, &p, params.s, seed).unwrap()
    }

    #[test]
    fn zero_info_gives_zero_codeword() {
        let code = small_code(2, 1);
        let cw = encode(&code, &vec![0; code.dimension()]).unwrap();
        assert!(cw.x.is_zero());
        assert!(check_satisfied(&code, &cw.x).unwrap());
        assert!(encode(&code, &[0]).is_err());
    }

    #[test]
    fn random_info_satisfies_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for q in [2, 3] {
            let code = small_code(q, 2);
            let f = code.params().field;
            for _ in 0..100 {
                let info: Vec<Elem> = (0..code.dimension()).map(|_| f.random(&mut rng)).collect();
                let cw = encode(&code, &info).unwrap();
                assert!(check_satisfied(&code, &cw.x).unwrap());
                let got: Vec<Elem> = code.info_positions().iter().map(|&(r, c)| cw.x.get(r, c)).collect();
                assert_eq!(got, info);
            }
        }
    }

    #[test]
    fn flipped_entry_breaks_a_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let code = small_code(2, 3);
        for _ in 0..50 {
            let info: Vec<Elem> = (0..code.dimension()).map(|_| rng.random_range(0..2)).collect();
            let mut x = encode(&code, &info).unwrap().x;
            let r = rng.random_range(0..code.n_v());
            let c = rng.random_range(0..code.params().m);
            x.set(r, c, 1 - x.get(r, c));
            assert!(!check_satisfied(&code, &x).unwrap());
        }
        let mut x = Matrix::zeros(code.params().field, code.params().l, code.params().m);
        x.set(code.params().l - 1, 0, 1);
        assert!(!check_satisfied(&code, &x).unwrap());
    }

    #[test]
    fn free_count_meets_rate_bound() {
        let params = validate_params(FieldSpec::binary(), 24, &ratio(1, 2), &ratio(1, 3)).unwrap();
        let p = rho_star(3, 6).unwrap().dist.to_node();
        let target = design_rate(&params, &p).unwrap();
        for seed in 0..20 {
            let code = sample_code(&params, &p, params.s, seed).unwrap();
            let bound = int((code.n_v() * params.m) as i64) * (int(1) - int(2) / p.mean());
            assert!(int(code.dimension() as i64) >= bound);
            assert!(exact_rate(&code) >= target);
            assert!(exact_rate(&code) >= *code.design_rate());
        }
    }

    #[test]
    fn hand_rank_example() {
        // Two degree-2 checks both joining variables 0 and 1, m = 1.
        let params = validate_params(FieldSpec::binary(), 4, &ratio(3, 4), &ratio(1, 3)).unwrap();
        assert_eq!((params.l, params.m, params.s), (3, 1, 1));
        let edges = vec![
            Edge { var: 0, check: 0, slot: 0 },
            Edge { var: 0, check: 1, slot: 0 },
            Edge { var: 1, check: 0, slot: 1 },
            Edge { var: 1, check: 1, slot: 1 },
        ];
        let graph = TannerGraph::from_edges(2, vec![2, 2], edges).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let code = lift(graph, &params, &mut rng).unwrap();
        assert!(code.labels().iter().all(|h| h.get(0, 0) == 1));
        assert_eq!(code.rank(), 1);
        assert_eq!(exact_rate(&code), ratio(1, 12));
    }

    #[test]
    fn same_seed_same_code() {
        let a = small_code(3, 77);
        let b = small_code(3, 77);
        assert_eq!(a, b);
        assert_ne!(a, small_code(3, 78));
        for h in a.labels() {
            assert_eq!(h.rank(), a.params().m);
        }
    }

    #[test]
    fn json_roundtrip() {
        let code = small_code(3, 5);
        let back = LiftedCode::from_json(&code.to_json()).unwrap();
        assert_eq!(back, code);
        assert_eq!(back.design_rate(), code.design_rate());
        assert_eq!(back.to_json(), code.to_json());
    }

    #[test]
    fn rejects_wrong_variable_count() {
        let params = validate_params(FieldSpec::binary(), 24, &ratio(1, 2), &ratio(1, 3)).unwrap();
        let p = rho_star(3, 6).unwrap().dist.to_node();
        assert!(sample_code(&params, &p, params.s - 1, 0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let degs = realize_degree_sequence(&p, 11).unwrap();
        let g = sample_tanner_graph(&degs, 11, &mut rng).unwrap();
        assert!(lift(g, &params, &mut rng).is_err());
    }
}
