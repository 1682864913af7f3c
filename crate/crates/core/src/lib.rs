//! Certifier and exact desk-scale verifier for a contraction-based uniqueness
//! criterion for Gibbs fields on bounded-degree graphs.
//!
//! The crate has three layers:
//!
//! * Closed-form layer: [`graph`] supplies degrees, a greedy chromatic
//!   partition, the path metric, boundaries and shells; [`criterion`] turns
//!   the norm data (κ̄, c̄, Δ, χ, K) into the admissibility threshold K*, the
//!   2×2 sweep-contraction matrix M(K), its spectral radius r_K, and the
//!   correlation-decay constants (ξ, α_K, C_K).
//! * Exact-model layer: [`spin`] builds one-site conditional distributions
//!   from pair potentials on a finite alphabet and verifies, by exhaustive
//!   enumeration, that a model actually satisfies the sensitivity and
//!   moment-growth bounds the criterion assumes; [`oracle`] holds brute-force
//!   Gibbs measures with consistency checks, covariances and conditionals.
//! * Coupling layer: [`coupling`] carries exact probability tables on the
//!   doubled configuration space, the optimal total-variation coupling, the
//!   single-site redistribution operator, chromatic sweeps, and the (γ, λ)
//!   functionals whose contraction the certificate predicts.
//!
//! Everything is dense and exact (up to f64 rounding): state spaces are
//!   enumerated completely, subject to a configurable size cap. All iteration
//!   orders are fixed (lexicographic vertex ids, ascending indices), so equal
//!   inputs give byte-identical reports.

pub mod config;
pub mod coupling;
pub mod criterion;
pub mod error;
pub mod graph;
pub mod oracle;
pub mod report;
pub mod space;
pub mod spin;

pub use config::ModelSpec;
pub use coupling::{CouplingTable, SweepDiagnostics};
pub use criterion::{ContractionParams, UniquenessCertificate, Verdict};
pub use graph::{ColorPartition, Graph};
pub use oracle::{ExactMeasure, Observable};
pub use spin::{FiniteSpinModel, LocalDistribution};

/// Default tolerance for checks that are exact identities in real arithmetic
/// (normalization, marginals, measure consistency).
pub const TOL_EXACT: f64 = 1e-12;

/// Default tolerance for inequality slacks that accumulate rounding over
/// whole-table reductions (lemma estimates, componentwise dominations).
pub const TOL_SLACK: f64 = 1e-10;

/// Default cap on the number of entries of a doubled-space table.
pub const STATE_CAP: usize = 1 << 22;
