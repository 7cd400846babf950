use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("fractional order must lie in (0, 1), got {0}")]
    InvalidOrder(f64),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("imaginary residue {residue:.3e} exceeds tolerance relative to max |T| = {scale:.3e}")]
    ComplexResidue { residue: f64, scale: f64 },

    #[error("decay fit needs at least 8 tail points with nonzero magnitude, found {0}")]
    DecayTailTooShort(usize),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("degenerate simplex #{index} with vertices {vertices:?} (volume {volume:.3e})")]
    DegenerateSimplex {
        index: usize,
        vertices: Vec<usize>,
        volume: f64,
    },

    #[error("memory budget exceeded: {0}")]
    MemoryBudget(String),

    #[error("transfer matrix has {} empty column(s) (first: {:?}); refine the overlay grid", .columns.len(), .columns.first())]
    EmptyColumns { columns: Vec<usize> },

    #[error("incomplete Cholesky breakdown at row {row} (pivot {pivot:.3e})")]
    FactorizationBreakdown { row: usize, pivot: f64 },

    #[error("dense oracle size guard: {size} unknowns exceeds {limit}")]
    OracleTooLarge { size: usize, limit: usize },

    #[error("phase `{phase}` failed: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn in_phase(self, phase: &'static str) -> Self {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }
}
