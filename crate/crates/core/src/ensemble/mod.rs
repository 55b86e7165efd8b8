//! The lifted sparse-graph code ensemble.

pub mod code;
pub mod degree;
pub mod graph;

pub use code::{check_satisfied, encode, exact_rate, lift, sample_code, Codeword, LiftedCode};
pub use degree::{
    design_rate, edge_to_node, integral_rho, node_to_edge, rho_star, EdgeDegreeDistribution,
    NodeDegreeDistribution, TruncatedRhoStar,
};
pub use graph::{realize_degree_sequence, sample_tanner_graph, Edge, TannerGraph};
