//! Tanner graphs with degree-2 variables, drawn from the configuration model.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::degree::NodeDegreeDistribution;
use crate::error::{Error, Result};
use crate::rational::{self, int, Rational};

/// Whole-pairing attempts before giving up on a simple graph.
pub const MAX_PAIRING_ATTEMPTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub var: usize,
    pub check: usize,
    pub slot: usize,
}

/// Edges are stored variable-major: edges `2i` and `2i+1` belong to variable `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord", into = "GraphRecord")]
pub struct TannerGraph {
    n_v: usize,
    check_degrees: Vec<usize>,
    edges: Vec<Edge>,
    check_edges: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GraphRecord {
    n_v: usize,
    check_degrees: Vec<usize>,
    edges: Vec<Edge>,
}

impl TryFrom<GraphRecord> for TannerGraph {
    type Error = Error;
    fn try_from(r: GraphRecord) -> Result<Self> {
        TannerGraph::from_edges(r.n_v, r.check_degrees, r.edges)
    }
}

impl From<TannerGraph> for GraphRecord {
    fn from(g: TannerGraph) -> Self {
        GraphRecord { n_v: g.n_v, check_degrees: g.check_degrees, edges: g.edges }
    }
}

impl TannerGraph {
    /// Builds a graph and checks every structural invariant.
    pub fn from_edges(n_v: usize, check_degrees: Vec<usize>, edges: Vec<Edge>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidParams(format!("tanner graph: {msg}")));
        if edges.len() != 2 * n_v {
            return bad(format!("{} edges for {} degree-2 variables", edges.len(), n_v));
        }
        let mut check_edges: Vec<Vec<Option<usize>>> = check_degrees.iter().map(|&d| vec![None; d]).collect();
        for (e, edge) in edges.iter().enumerate() {
            if edge.var != e / 2 {
                return bad(format!("edge {e} is not variable-major"));
            }
            let Some(slots) = check_edges.get_mut(edge.check) else {
                return bad(format!("edge {e} points at missing check {}", edge.check));
            };
            match slots.get_mut(edge.slot) {
                Some(s @ None) => *s = Some(e),
                _ => return bad(format!("edge {e} uses an invalid or taken slot")),
            }
        }
        for i in 0..n_v {
            if edges[2 * i].check == edges[2 * i + 1].check {
                return bad(format!("variable {i} has a double edge"));
            }
        }
        let check_edges: Option<Vec<Vec<usize>>> =
            check_edges.into_iter().map(|slots| slots.into_iter().collect()).collect();
        let Some(check_edges) = check_edges else {
            return bad("check degrees do not match the edge list".into());
        };
        Ok(TannerGraph { n_v, check_degrees, edges, check_edges })
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn n_c(&self) -> usize {
        self.check_degrees.len()
    }

    pub fn check_degrees(&self) -> &[usize] {
        &self.check_degrees
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> Edge {
        self.edges[e]
    }

    /// The two edges of variable `i`.
    pub fn var_edges(&self, i: usize) -> [usize; 2] {
        [2 * i, 2 * i + 1]
    }

    /// The other edge at the same variable.
    pub fn sibling(&self, e: usize) -> usize {
        e ^ 1
    }

    /// Edge ids at check `a`, in slot order.
    pub fn check_edges(&self, a: usize) -> &[usize] {
        &self.check_edges[a]
    }

    /// Realized node-perspective distribution.
    pub fn degree_distribution(&self) -> Result<NodeDegreeDistribution> {
        let n_c = self.n_c() as i64;
        NodeDegreeDistribution::new(self.check_degrees.iter().map(|&d| (d, rational::ratio(1, n_c))))
    }
}

fn max_deviation(counts: &[usize], targets: &[Rational]) -> Rational {
    counts
        .iter()
        .zip(targets)
        .map(|(&c, t)| {
            let d = int(c as i64) - t;
            if d < int(0) {
                -d
            } else {
                d
            }
        })
        .max()
        .unwrap_or_else(|| int(0))
}

fn sq_deviation(counts: &[usize], targets: &[Rational]) -> Rational {
    counts
        .iter()
        .zip(targets)
        .map(|(&c, t)| {
            let d = int(c as i64) - t;
            &d * &d
        })
        .sum()
}

/// Check degrees realizing `p` over `n_v` degree-2 variables.
///
/// Uses n_c = floor(2 n_v / P'(1)) checks. Counts start from largest-remainder
/// rounding of n_c·P_d; single-check degree moves inside the support then fix
/// the edge total, and sum-preserving pair moves reduce the deviation from
/// the targets. Returned in increasing order.
pub fn realize_degree_sequence(p: &NodeDegreeDistribution, n_v: usize) -> Result<Vec<usize>> {
    let total = 2 * n_v;
    let support = p.support();
    if total < p.min_degree() {
        return Err(Error::Infeasible(format!(
            "{total} variable stubs cannot fill a check of degree {}",
            p.min_degree()
        )));
    }
    let n_c = rational::as_integer(&(int(total as i64) / p.mean()).floor())
        .and_then(|v| usize::try_from(v).ok())
        .unwrap_or(0)
        .max(1);
    if n_c * p.max_degree() < total {
        return Err(Error::Infeasible(format!(
            "{n_c} checks of degree at most {} cannot absorb {total} stubs",
            p.max_degree()
        )));
    }
    let targets: Vec<Rational> = support.iter().map(|&d| p.get(d) * int(n_c as i64)).collect();

    // Largest remainder.
    let mut counts: Vec<usize> = targets
        .iter()
        .map(|t| rational::as_usize(&t.floor()).expect("non-negative"))
        .collect();
    let mut order: Vec<usize> = (0..support.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = &targets[a] - targets[a].floor();
        let fb = &targets[b] - targets[b].floor();
        fb.cmp(&fa).then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &j in order.iter().take(n_c - assigned) {
        counts[j] += 1;
    }

    // Fix the stub total with moves in the right direction.
    loop {
        let sum: usize = counts.iter().zip(&support).map(|(c, d)| c * d).sum();
        if sum == total {
            break;
        }
        let diff = total as i64 - sum as i64;
        let mut best: Option<(Rational, Rational, usize, usize)> = None;
        for from in 0..support.len() {
            if counts[from] == 0 {
                continue;
            }
            for to in 0..support.len() {
                let step = support[to] as i64 - support[from] as i64;
                if step == 0 || step.signum() != diff.signum() || step.abs() > diff.abs() {
                    continue;
                }
                let mut trial = counts.clone();
                trial[from] -= 1;
                trial[to] += 1;
                let key = (max_deviation(&trial, &targets), sq_deviation(&trial, &targets), from, to);
                if best.as_ref().is_none_or(|b| (&key.0, &key.1) < (&b.0, &b.1)) {
                    best = Some(key);
                }
            }
        }
        let Some((_, _, from, to)) = best else {
            return Err(Error::Infeasible(format!(
                "no in-support degree sequence of {n_c} checks sums to {total}"
            )));
        };
        counts[from] -= 1;
        counts[to] += 1;
    }

    // Sum-preserving pair moves while they help.
    loop {
        let current = (max_deviation(&counts, &targets), sq_deviation(&counts, &targets));
        let mut best: Option<((Rational, Rational), Vec<usize>)> = None;
        let s = support.len();
        for a in 0..s {
            for b in 0..s {
                for c in 0..s {
                    for d in 0..s {
                        // Move one check a→b and one check c→d.
                        if a == b || c == d {
                            continue;
                        }
                        let delta = support[b] as i64 - support[a] as i64 + support[d] as i64 - support[c] as i64;
                        if delta != 0 {
                            continue;
                        }
                        let mut trial = counts.clone();
                        if trial[a] == 0 {
                            continue;
                        }
                        trial[a] -= 1;
                        trial[b] += 1;
                        if trial[c] == 0 {
                            continue;
                        }
                        trial[c] -= 1;
                        trial[d] += 1;
                        let key = (max_deviation(&trial, &targets), sq_deviation(&trial, &targets));
                        if key < current && best.as_ref().is_none_or(|(k, _)| key < *k) {
                            best = Some((key, trial));
                        }
                    }
                }
            }
        }
        match best {
            Some((_, trial)) => counts = trial,
            None => break,
        }
    }

    let mut degrees = Vec::with_capacity(n_c);
    for (c, &d) in counts.iter().zip(&support) {
        degrees.extend(std::iter::repeat_n(d, *c));
    }
    Ok(degrees)
}

/// Uniform stub pairing conditioned on every variable reaching two
/// distinct checks. Whole pairings are redrawn until simple.
pub fn sample_tanner_graph<R: Rng + ?Sized>(degrees: &[usize], n_v: usize, rng: &mut R) -> Result<TannerGraph> {
    let total: usize = degrees.iter().sum();
    if total != 2 * n_v {
        return Err(Error::InvalidParams(format!("check degrees sum to {total}, expected 2*n_v = {}", 2 * n_v)));
    }
    if let Some(&d) = degrees.iter().find(|&&d| d > n_v) {
        return Err(Error::Infeasible(format!("a check of degree {d} needs more than {n_v} distinct variables")));
    }
    let mut stubs: Vec<(usize, usize)> = Vec::with_capacity(total);
    for (a, &d) in degrees.iter().enumerate() {
        stubs.extend((0..d).map(|slot| (a, slot)));
    }
    for _ in 0..MAX_PAIRING_ATTEMPTS {
        stubs.shuffle(rng);
        if stubs.chunks_exact(2).all(|p| p[0].0 != p[1].0) {
            let edges = stubs
                .iter()
                .enumerate()
                .map(|(e, &(check, slot))| Edge { var: e / 2, check, slot })
                .collect();
            return TannerGraph::from_edges(n_v, degrees.to_vec(), edges);
        }
    }
    Err(Error::Infeasible(format!(
        "no simple pairing found in {MAX_PAIRING_ATTEMPTS} attempts"
    )))
}
