use thiserror::Error;

/// Errors produced by graph ingestion, the numerical kernels and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: usize },

    #[error("line {line}: edge weight {weight} is not strictly positive")]
    NonPositiveWeight { line: usize, weight: f64 },

    #[error("line {line}: duplicate edge ({i}, {j})")]
    DuplicateEdge { line: usize, i: usize, j: usize },

    #[error("line {line}: node {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { line: usize, node: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector lies in the span of the basis (residual norm {residual:e})")]
    LinearDependence { residual: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("dense problem of dimension {dim} exceeds the cap {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("incomplete Cholesky failed at row {row} even with shift {shift:e}")]
    Ic0Failed { row: usize, shift: f64 },

    #[error("graph has {components} connected components; lambda_2 > 0 if and only if the graph is connected")]
    Disconnected { components: usize },

    #[error("degenerate search plane: direction is parallel to the iterate")]
    DegeneratePlane,

    #[error("{solver}: no convergence for pair {pair} ({converged} pairs accepted): {detail}")]
    NoConvergence {
        solver: &'static str,
        pair: usize,
        converged: usize,
        /// Counters and the eigenvalues accepted before giving up.
        report: Box<crate::report::SolverReport>,
        detail: String,
    },

    #[error("{solver}: inner linear solve failed at outer iteration {outer}: {detail}")]
    InnerSolve { solver: &'static str, outer: usize, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
