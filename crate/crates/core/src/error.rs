use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("positivity violated at {location}: {detail}")]
    PositivityViolation { location: String, detail: String },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("mismatched grids: {0}")]
    GridMismatch(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("no barrier constant up to {max_c} gives a sub-solution (worst residual {worst})")]
    FailsAtMaxC { max_c: f64, worst: f64 },

    #[error("initial guess failed: {0}")]
    InitFailure(String),

    #[error("Newton did not converge in {iters} iterations (residual {residual:e})")]
    MaxIters { iters: usize, residual: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("ellipticity margin collapsed at iteration {iter}: margin {margin:e}, residual {residual:e}")]
    MarginCollapse {
        iter: usize,
        margin: f64,
        residual: f64,
    },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("geodesic operator not positive at {0}")]
    NonPositiveG(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn positivity(location: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::PositivityViolation {
            location: location.into(),
            detail: detail.into(),
        }
    }
}
