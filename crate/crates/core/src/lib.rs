//! Unsupervised hypergraph neural solver for Weighted MaxSAT.
//!
//! An instance is modelled as a weighted hypergraph with one node per
//! literal and one hyperedge per clause. A small hypergraph convolutional
//! network with a cross-attention block between the positive and negative
//! literal banks is fitted to that single instance by minimizing a
//! differentiable relaxation of the weighted number of unsatisfied clauses.
//! The resulting per-variable probabilities are rounded by Bernoulli
//! sampling.
//!
//! Module map:
//!
//! - [`wcnf`]: instances, DIMACS parsing/writing, evaluation, generators.
//! - [`hypergraph`]: literal/variable hypergraphs and the normalized
//!   convolution operator.
//! - [`autodiff`]: dense matrices and a reverse-mode tape.
//! - [`model`]: the network and its parameters.
//! - [`objective`]: task and shared-representation losses.
//! - [`solver`]: Adam, early stopping, sampling, `solve`.
//! - [`oracle`]: exhaustive optimum and weighted local search.
//! - [`dataset`]: SATLIB-shaped random benchmark sets.

pub mod autodiff;
pub mod dataset;
pub mod error;
pub mod hypergraph;
pub mod model;
pub mod objective;
pub mod oracle;
pub mod rng;
pub mod solver;
pub mod wcnf;

pub use autodiff::{DenseMatrix, Tape, Var};
pub use error::{Error, Result};
pub use hypergraph::{HypergraphMode, LiteralHypergraph, NormalizedOperator};
pub use model::{ModelConfig, ModelParameters};
pub use objective::LossBreakdown;
pub use oracle::OracleResult;
pub use solver::{SolveConfig, SolveResult};
pub use wcnf::{Assignment, Clause, Evaluation, WcnfInstance};
