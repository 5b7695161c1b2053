use thiserror::Error;

/// Errors raised by the registration library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate cell {cell}: volume {volume:e}")]
    DegenerateCell { cell: usize, volume: f64 },

    #[error("point {point:?} lies outside the mesh domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("conjugate gradients did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverNotConverged { iterations: usize, residual: f64 },

    #[error("numeric blowup in {pass} at step {step} (max |value| = {max_abs:e})")]
    NumericBlowup {
        pass: &'static str,
        step: usize,
        max_abs: f64,
    },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NumericBlowup { .. }
            | Error::SolverNotConverged { .. }
            | Error::DegenerateCell { .. } => true,
            Error::Stage { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
