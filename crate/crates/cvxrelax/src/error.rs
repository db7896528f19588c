use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point {0:?} lies outside the meshed domain")]
    OutsideDomain(Vec<f64>),
    #[error("simplex {0} is degenerate")]
    DegenerateSimplex(usize),
    #[error(
        "normal matrix is numerically singular at pivot {pivot} (value {value:e}); \
         add a block with an identity operator (a data term) to make it invertible"
    )]
    SingularNormalMatrix { pivot: usize, value: f64 },
    #[error("matrix is not positive definite (pivot {pivot}, value {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("rank deficient least-squares subproblem on active set {0:?}")]
    RankDeficient(Vec<usize>),
    #[error("infeasible problem: {0}")]
    Infeasible(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("non-finite iterate at iteration {iteration} in block {block}")]
    NonFinite { iteration: usize, block: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
