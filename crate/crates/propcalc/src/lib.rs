//! Exact symbolic calculus for directed graph complexes.
//!
//! The crate builds free graph algebras over S-bimodules (props, properads,
//! operads and their wheeled versions), applies generator-defined differentials,
//! verifies d^2 = 0 and cocycle conditions, evaluates representations by tensor
//! contraction with super-traces, runs Maurer-Cartan / L-infinity deformation
//! checks, and checks quantum master equations for formal BV manifolds.
//!
//! All arithmetic is exact over the rationals; nothing here floats.

pub mod bv;
pub mod catalog;
pub mod deform;
pub mod diff;
pub mod engine;
pub mod geometry;
pub mod graph;
pub mod report;
pub mod span;

use num::BigRational;
use thiserror::Error;

/// Exact scalar type used everywhere.
pub type Q = BigRational;

/// Shorthand for building a rational from an integer.
pub fn q(n: i64) -> Q {
    Q::from_integer(n.into())
}

/// Shorthand for building a rational from a numerator/denominator pair.
pub fn qr(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

/// Size guards. These are configuration, not hidden truncation: exceeding a
/// limit is an explicit error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeLimits {
    pub max_vertices: usize,
    pub max_edges: usize,
}

impl Default for SizeLimits {
    fn default() -> Self {
        SizeLimits {
            max_vertices: 12,
            max_edges: 24,
        }
    }
}

/// Crate-wide error type. Variant names follow the per-module error contracts.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum Error {
    #[error("duplicate label or doubly used half-edge: {0}")]
    DuplicateLabel(String),
    #[error("dangling half-edge: {0}")]
    DanglingHalfEdge(String),
    #[error("orientation mismatch or out-of-range half-edge reference: {0}")]
    OrientationMismatch(String),
    #[error("size limit exceeded: {0}")]
    SizeLimitExceeded(String),
    #[error("subgraph not admissible: {0}")]
    NotAdmissible(String),
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("trace over infinite-dimensional space")]
    InfiniteTrace,
    #[error("unknown presentation name: {0}")]
    UnknownName(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("element is not Maurer-Cartan within the requested bounds")]
    NotMaurerCartan,
    #[error("element is not homogeneous")]
    NonHomogeneous,
    #[error("substitution does not preserve the odd bracket: {0}")]
    NotSymplectic(String),
    #[error("substitution is not invertible at linear order")]
    NotInvertible,
    #[error("data does not satisfy the unimodular Lie 1-bialgebra axioms: {0}")]
    NotULie1B(String),
    #[error("bad configuration: {0}")]
    ConfigError(String),
}

pub type Result<T> = std::result::Result<T, Error>;
