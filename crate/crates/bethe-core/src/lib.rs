//! Off-shell Bethe vectors for integrable spin chains with gl_n, o_{2n+1},
//! sp_{2n} and o_{2n} symmetry.
//!
//! The crate realizes the rational R-matrix of each symmetry class, builds
//! inhomogeneous fundamental monodromy matrices T(u), extracts vacua, zero
//! modes and color operators, and constructs off-shell Bethe vectors B(t̄)
//! from rectangular recurrence relations. Every action formula, recurrence
//! and eigenvalue formula is verifiable either exactly (arbitrary-precision
//! rationals) or numerically on-shell (complex doubles), and composite
//! two-chain models expose the coproduct structure of the vectors.
//!
//! Module map:
//! - [`algebra_spec`]: discrete data of the four symmetry classes.
//! - [`tensor_linalg`]: scalar backends and sparse operators on the
//!   N^L-dimensional quantum space.
//! - [`lattice_model`]: R-matrix, monodromy, vacuum, zero modes, and the
//!   algebra-level exchange-relation checks.
//! - [`rf_kernel`]: the scalar rational functions, partition combinatorics
//!   and coefficient tables entering every identity.
//! - [`bethe_engine`]: Bethe-vector construction and off-shell verification.
//! - [`onshell_solver`]: Bethe equations, root finding, eigenvalue formulas
//!   and the brute-force spectral oracle.
//! - [`coproduct`]: composite chains and the coproduct formula.

pub mod algebra_spec;
pub mod bethe_engine;
pub mod coproduct;
pub mod lattice_model;
pub mod onshell_solver;
pub mod report;
pub mod rf_kernel;
pub mod tensor_linalg;

pub use algebra_spec::{AlgebraKind, AlgebraSpec};
pub use report::{CheckRecord, VerificationReport};
pub use rf_kernel::BetheSets;
pub use tensor_linalg::{QuantumOperator, Rat, Scalar, StateVector, C64};
