//! Continual-learning library built around restricted orthogonal gradient
//! projection: frozen-subspace gradient constraints, an iterative search for
//! a relaxable subspace inside the frozen space, scale-matrix-regularized
//! updates, and a desk-scale benchmark harness with per-task metrics.

pub mod bench;
pub mod error;
pub mod linalg;
pub mod network;
pub mod projector;
pub mod relax;
pub mod rng;
pub mod subspace;

pub use error::{Error, Result};
