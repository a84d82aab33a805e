use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("degree {degree} out of range for a {dim}-dimensional grid")]
    Degree { degree: usize, dim: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("missing support degree {0}")]
    MissingSupport(usize),

    #[error("linear solver did not converge after {iterations} iterations (residual {residual:.3e}, rhs norm {rhs_norm:.3e})")]
    SolverDidNotConverge {
        iterations: usize,
        residual: f64,
        rhs_norm: f64,
    },

    #[error("eigensolver did not converge after {iterations} iterations (block size {block}, worst residual {residual:.3e})")]
    EigenDidNotConverge {
        iterations: usize,
        block: usize,
        residual: f64,
    },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("archive error: {0}")]
    Archive(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
