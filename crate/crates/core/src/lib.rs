//! Simulation of the worst-case to average-case reduction for
//! matrix-vector multiplication over prime fields.
//!
//! Quantum oracles are modelled as query-counted classical functions, the
//! average-case algorithm as a probabilistic black box with a configurable
//! per-input success law, and the product verifier as a one-sided-error
//! random-challenge check charged at the quantum verifier's query cost.

pub mod error;
pub mod field;
pub mod harness;
pub mod hash;
pub mod linalg;
pub mod oracle;
pub mod reduction;
pub mod sampler;
pub mod solver;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use field::{FieldElement, PrimeField};
pub use linalg::{FpMatrix, FpVector};
pub use oracle::{LedgerSnapshot, MatrixOracle, QueryLedger, Source, VectorOracle};
pub use reduction::{Reduction, ReductionConfig, RunContext};
pub use solver::{FailureMode, NoisySolver, Predicate, SolverProfile};
pub use verify::{CostAccounting, Verdict, VerifierConfig, VerifierMode};
