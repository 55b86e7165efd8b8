//! Check-node degree distributions in node (P) and edge (ρ) perspective.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::channel::SncParams;
use crate::error::{Error, Result};
use crate::rational::{self, int, ratio, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
struct Coeffs(#[serde(with = "coeff_map")] BTreeMap<usize, Rational>);

mod coeff_map {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<usize, Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let out: BTreeMap<usize, String> = m.iter().map(|(&d, r)| (d, rational::format(r))).collect();
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<usize, Rational>, D::Error> {
        let raw = BTreeMap::<usize, String>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| rational::parse(&v).map(|r| (k, r)).map_err(serde::de::Error::custom))
            .collect()
    }
}

impl Coeffs {
    fn new(raw: BTreeMap<usize, Rational>) -> Result<Self> {
        let mut out = BTreeMap::new();
        let mut total = int(0);
        for (d, c) in raw {
            if c.is_negative() {
                return Err(Error::InvalidDistribution(format!("negative coefficient at degree {d}")));
            }
            if c.is_zero() {
                continue;
            }
            if d == 0 {
                return Err(Error::InvalidDistribution("degree 0 carries mass".into()));
            }
            total += &c;
            out.insert(d, c);
        }
        if total != int(1) {
            return Err(Error::InvalidDistribution(format!(
                "coefficients sum to {}, expected 1",
                rational::format(&total)
            )));
        }
        Ok(Coeffs(out))
    }
}

/// Node perspective: fraction P_i of checks with degree i.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDegreeDistribution {
    coeffs: Coeffs,
}

/// Edge perspective: fraction ρ_n of edges attached to a degree-n check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDegreeDistribution {
    coeffs: Coeffs,
}

macro_rules! common_methods {
    ($t:ty) => {
        impl $t {
            pub fn new<I: IntoIterator<Item = (usize, Rational)>>(coeffs: I) -> Result<Self> {
                let mut raw = BTreeMap::new();
                for (d, c) in coeffs {
                    *raw.entry(d).or_insert_with(|| int(0)) += c;
                }
                Ok(Self { coeffs: Coeffs::new(raw)? })
            }

            pub fn concentrated(d: usize) -> Result<Self> {
                Self::new([(d, int(1))])
            }

            /// Nonzero coefficients in increasing degree.
            pub fn coeffs(&self) -> &BTreeMap<usize, Rational> {
                &self.coeffs.0
            }

            pub fn get(&self, d: usize) -> Rational {
                self.coeffs.0.get(&d).cloned().unwrap_or_else(|| int(0))
            }

            pub fn support(&self) -> Vec<usize> {
                self.coeffs.0.keys().copied().collect()
            }

            pub fn min_degree(&self) -> usize {
                *self.coeffs.0.keys().next().expect("non-empty")
            }

            pub fn max_degree(&self) -> usize {
                *self.coeffs.0.keys().next_back().expect("non-empty")
            }
        }
    };
}

common_methods!(NodeDegreeDistribution);
common_methods!(EdgeDegreeDistribution);

impl NodeDegreeDistribution {
    /// P'(1), the mean check degree.
    pub fn mean(&self) -> Rational {
        self.coeffs().iter().map(|(&d, p)| p * int(d as i64)).sum()
    }

    /// P''(1) = Σ i(i-1) P_i.
    pub fn second_derivative(&self) -> Rational {
        self.coeffs().iter().map(|(&d, p)| p * int((d * (d - 1)) as i64)).sum()
    }

    /// P''(1)/P'(1).
    pub fn derivative_ratio(&self) -> Rational {
        self.second_derivative() / self.mean()
    }

    pub fn to_edge(&self) -> EdgeDegreeDistribution {
        node_to_edge(self)
    }
}

impl EdgeDegreeDistribution {
    /// ∫₀¹ ρ = Σ ρ_n / n.
    pub fn integral(&self) -> Rational {
        integral_rho(self)
    }

    pub fn to_node(&self) -> NodeDegreeDistribution {
        edge_to_node(self)
    }

    /// (degree, probability) pairs in f64, for sampling.
    pub fn weights(&self) -> Vec<(usize, f64)> {
        self.coeffs().iter().map(|(&d, r)| (d, rational::to_f64(r))).collect()
    }
}

pub fn integral_rho(rho: &EdgeDegreeDistribution) -> Rational {
    rho.coeffs().iter().map(|(&d, r)| r / int(d as i64)).sum()
}

/// P_n = (ρ_n/n) / Σ_j ρ_j/j.
pub fn edge_to_node(rho: &EdgeDegreeDistribution) -> NodeDegreeDistribution {
    let total = integral_rho(rho);
    let coeffs = rho.coeffs().iter().map(|(&d, r)| (d, r / int(d as i64) / &total)).collect();
    NodeDegreeDistribution { coeffs: Coeffs(coeffs) }
}

/// ρ_n = n P_n / Σ_j j P_j.
pub fn node_to_edge(p: &NodeDegreeDistribution) -> EdgeDegreeDistribution {
    let mean = p.mean();
    let coeffs = p.coeffs().iter().map(|(&d, c)| (d, c * int(d as i64) / &mean)).collect();
    EdgeDegreeDistribution { coeffs: Coeffs(coeffs) }
}

/// The truncated capacity-achieving family: ρ_i = (k-1)/((i-1)(i-2)) for
/// k < i ≤ b, and ρ_k takes the remaining mass (k-1)/(b-1).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncatedRhoStar {
    pub k: usize,
    pub b: usize,
    pub dist: EdgeDegreeDistribution,
}

/// ρ*_{k,i} = (k-1)/((i-1)(i-2)).
pub fn rho_star_coefficient(k: usize, i: usize) -> Rational {
    ratio((k - 1) as i64, ((i - 1) * (i - 2)) as i64)
}

pub fn rho_star(k: usize, b: usize) -> Result<TruncatedRhoStar> {
    if k < 2 {
        return Err(Error::InvalidDistribution(format!(
            "rho_star needs k >= 2 (the (k-1) factor vanishes at k={k})"
        )));
    }
    if b < k + 1 {
        return Err(Error::InvalidDistribution(format!("truncation b={b} must be at least k+1={}", k + 1)));
    }
    let mut coeffs: Vec<(usize, Rational)> = (k + 1..=b).map(|i| (i, rho_star_coefficient(k, i))).collect();
    let tail: Rational = coeffs.iter().map(|(_, c)| c.clone()).sum();
    coeffs.push((k, int(1) - tail));
    Ok(TruncatedRhoStar { k, b, dist: EdgeDegreeDistribution::new(coeffs)? })
}

/// Σ_{i=k+1}^{b} ρ*_{k,i}, summed term by term.
pub fn rho_star_partial_sum(k: usize, b: usize) -> Rational {
    (k + 1..=b).map(|i| rho_star_coefficient(k, i)).sum()
}

/// (1-λ)(1-ω)(1 - 2/P'(1)).
pub fn design_rate(params: &SncParams, p: &NodeDegreeDistribution) -> Result<Rational> {
    let mean = p.mean();
    if mean <= int(2) {
        return Err(Error::InvalidDistribution(format!(
            "mean check degree P'(1) = {} must exceed 2",
            rational::format(&mean)
        )));
    }
    Ok((int(1) - &params.lambda) * (int(1) - &params.omega) * (int(1) - int(2) / mean))
}
