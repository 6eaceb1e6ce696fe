use thiserror::Error;

/// Errors raised by the analysis pipeline.
///
/// Variants split into two families: input errors (bad arguments, malformed
/// data) and numerical failures (divergence, ill-conditioning). The CLI maps
/// them to distinct exit codes via [`KoopmanError::is_input_error`].
#[derive(Debug, Clone, Error, PartialEq)]
pub enum KoopmanError {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("trajectory diverged at step {step}: {reason}")]
    Divergence { step: usize, reason: String },

    #[error("ill-conditioned snapshot matrix (numerical rank {rank} < {required}); use the SVD-based decomposition instead")]
    IllConditioned { rank: usize, required: usize },

    #[error("degenerate Vandermonde matrix: Ritz values {i} and {j} coincide within {tol:e}")]
    DegenerateVandermonde { i: usize, j: usize, tol: f64 },

    #[error("division by zero eigenvalue at position {0}")]
    ZeroEigenvalue(usize),

    #[error("range error: {0}")]
    Range(String),

    #[error("degenerate diffusion kernel: {0}; try the automatic bandwidth")]
    DegenerateKernel(String),

    #[error("eigensolver failed to converge after {0} iterations")]
    NoConvergence(usize),
}

impl KoopmanError {
    pub fn input(msg: impl Into<String>) -> Self {
        KoopmanError::Input(msg.into())
    }

    /// True for errors caused by the caller's data or arguments rather than
    /// by a numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            KoopmanError::Input(_)
                | KoopmanError::DimensionMismatch { .. }
                | KoopmanError::Parse { .. }
                | KoopmanError::EmptyData(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, KoopmanError>;
