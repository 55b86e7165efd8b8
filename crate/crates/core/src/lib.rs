//! Sparse-graph codes over F_q for the symmetric network coding channel,
//! decoded by passing affine subspaces, plus their density-evolution analysis.

pub mod channel;
pub mod counting;
pub mod decoder;
pub mod density;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod field;
pub mod matrix;
pub mod rational;
pub mod rng;
pub mod subspace;

pub use error::{Error, Result};
pub use field::{Elem, FieldSpec};
pub use matrix::Matrix;
pub use rational::Rational;
pub use subspace::{AffineSubspace, Subspace};
