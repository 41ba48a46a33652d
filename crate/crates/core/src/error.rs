use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric at ({i}, {j}): {a} != {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },

    #[error("matrix has a nonzero diagonal entry at ({i}, {i}): {value}")]
    NonHollow { i: usize, value: f64 },

    #[error("matrix has a non-finite entry at ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("every entry of the adjacency matrix is zero; distance is undefined")]
    AllZeroMatrix,

    #[error("invalid community assignment: {0}")]
    InvalidAssignment(String),

    #[error("marginal probabilities ({p}, {q}) are degenerate; only rho = 0 is allowed")]
    DegenerateMarginal { p: f64, q: f64 },

    #[error("rho = {rho} outside feasible interval [{lo}, {hi}]{}", block_suffix(.block))]
    RhoOutOfRange {
        rho: f64,
        lo: f64,
        hi: f64,
        block: Option<(usize, usize)>,
    },

    #[error("edge covariance is not positive definite (rho = {rho})")]
    InvalidCovariance { rho: f64 },

    #[error("input has zero variance")]
    ConstantInput,

    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },

    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),

    #[error("mixture component collapsed while fitting k = {k}")]
    DegenerateCluster { k: usize },

    #[error("no mixture model converged for any k in the sweep")]
    NoConvergedModel,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("the two graphs share no vertices")]
    EmptyIntersection,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn block_suffix(block: &Option<(usize, usize)>) -> String {
    match block {
        Some((a, b)) => format!(" in block ({}, {})", a + 1, b + 1),
        None => String::new(),
    }
}

impl Error {
    /// True for failures of a numerical routine on otherwise valid input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::EigenFailure(_)
                | Error::DegenerateCluster { .. }
                | Error::NoConvergedModel
                | Error::ConstantInput
                | Error::AllZeroMatrix
        )
    }
}
