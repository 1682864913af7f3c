//! Error types for graph construction, criterion evaluation, model
//! validation, and the exact engines.

use thiserror::Error;

/// Rejections raised while building or querying a graph.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("edge list is empty")]
    EmptyEdgeList,
    #[error("self-loop at vertex '{0}'")]
    SelfLoop(String),
    #[error("duplicate edge ('{0}', '{1}')")]
    DuplicateEdge(String, String),
    #[error("graph is disconnected: vertex '{0}' is not reachable from vertex '{1}'")]
    Disconnected(String, String),
    #[error("unknown vertex '{0}'")]
    UnknownVertex(String),
}

/// Rejections raised by the closed-form criterion layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriterionError {
    #[error("kappa norm is inadmissible: row-sum supremum {kappa_bar} must be < 1")]
    InadmissibleKappa { kappa_bar: f64 },
    #[error("c norm is inadmissible: row-sum supremum {c_bar} must lie in (0, {limit})")]
    InadmissibleC { c_bar: f64, limit: f64 },
    #[error("threshold formula requires a strictly positive c norm; got c̄ = 0")]
    ZeroC,
    #[error("max degree must be at least 2; got {delta} (single-edge graphs are not covered)")]
    DegreeTooSmall { delta: usize },
    #[error("delta {delta} is below the graph's max degree {observed}")]
    DeltaBelowGraph { delta: usize, observed: usize },
    #[error("{field} entries must be nonnegative and finite; got {value}")]
    BadEntry { field: String, value: f64 },
    #[error("chi must lie in [2, delta+1] = [2, {max}]; got {chi}")]
    ChiOutOfRange { chi: usize, max: usize },
    #[error("no contraction: spectral radius {r} is not below 1")]
    NoContraction { r: f64 },
    #[error("K must be positive; got {k}")]
    NonPositiveK { k: f64 },
}

/// Rejections raised while constructing or querying a finite spin model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpinError {
    #[error("alphabet must contain at least 2 symbols; got {0}")]
    AlphabetTooSmall(usize),
    #[error("duplicate spin symbol '{0}'")]
    DuplicateSymbol(String),
    #[error("reference weight for symbol '{symbol}' must be > 0; got {value}")]
    NonPositiveWeight { symbol: String, value: f64 },
    #[error("h value for symbol '{symbol}' must be >= 0 and finite; got {value}")]
    InvalidH { symbol: String, value: f64 },
    #[error("expected {expected} entries aligned with the alphabet; got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("potential table for edge ('{a}', '{b}') must be {m}x{m}")]
    BadPotentialShape { a: String, b: String, m: usize },
    #[error("duplicate potential table for edge ('{a}', '{b}')")]
    DuplicatePotential { a: String, b: String },
    #[error("potential table refers to non-edge ('{a}', '{b}')")]
    PotentialOnNonEdge { a: String, b: String },
    #[error("boundary assignment is missing neighbor '{0}'")]
    MissingNeighbor(String),
    #[error("unknown spin symbol '{0}'")]
    UnknownSymbol(String),
    #[error("distributions live on different alphabets ({0} vs {1} symbols)")]
    AlphabetMismatch(usize, usize),
    #[error("'{0}' is not a neighbor of '{1}'")]
    NotNeighbor(String, String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Failures of the exact engines on the doubled configuration space.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("state space too large: {needed} table entries exceed the cap of {cap}")]
    CapExceeded { needed: u128, cap: usize },
    #[error("table is not a probability distribution: {0}")]
    InvalidTable(String),
    #[error("operands live on different configuration spaces")]
    SpaceMismatch,
    #[error("color partition is invalid: {0}")]
    BadPartition(String),
    #[error(
        "contraction falsified at sweep {sweep}: transformed norm ratio {observed} \
         exceeds the certified factor {expected}"
    )]
    ContractionFalsified {
        sweep: usize,
        observed: f64,
        expected: f64,
    },
    #[error("componentwise bound falsified at stage {stage}: ({gamma}, {lambda}) exceeds ({gamma_bound}, {lambda_bound})")]
    DominationFalsified {
        stage: usize,
        gamma: f64,
        lambda: f64,
        gamma_bound: f64,
        lambda_bound: f64,
    },
    #[error("observable is invalid: {0}")]
    BadObservable(String),
    #[error("decay experiment requires a certified model; verdict was {verdict}")]
    NotCertified { verdict: String },
    #[error("decay experiment requires two distinct sites")]
    SameSite,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Criterion(#[from] CriterionError),
    #[error(transparent)]
    Spin(#[from] SpinError),
}

/// Errors raised while reading a model specification file.
#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read '{path}': {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error(transparent)]
    Criterion(#[from] CriterionError),
}
