use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid point set: {0}")]
    InvalidPointSet(String),

    #[error("minimum-norm point did not converge after {iterations} iterations")]
    MinNormNonConvergence { iterations: usize },

    #[error("degenerate optimality class: {0}")]
    DegenerateClass(String),

    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),

    #[error("polytopes do not intersect")]
    EmptyIntersection,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid too large: {nodes} nodes exceeds budget {budget}")]
    GridTooLarge { nodes: usize, budget: usize },

    #[error("point budget exceeded: {count} points exceeds {budget}")]
    BudgetExceeded { count: usize, budget: usize },

    #[error("infeasible endpoints: {0}")]
    InfeasibleEndpoints(String),

    #[error("shock event is not effective")]
    NotEffective,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
