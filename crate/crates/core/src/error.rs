use thiserror::Error;

/// Errors raised by the solver and its numerical building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("derivative requested exactly at breakpoint x = {0} without a side")]
    AmbiguousBreakpoint(f64),

    #[error("level set unresolved in cell [{lo}, {hi}] after maximum subdivision depth")]
    Resolution { lo: f64, hi: f64 },

    #[error("mixed densities are undefined at the threshold alpha = 1")]
    DegenerateThreshold,

    #[error("nonphysical configuration: {0}")]
    Nonphysical(String),

    #[error("degenerate continuum of solutions: {0}")]
    DegenerateContinuum(String),

    #[error("infeasible topology: {0}")]
    InfeasibleTopology(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no convergence after {iterations} iterations: {detail}")]
    NoConvergence { iterations: usize, detail: String },

    #[error("quadrature tolerance not met: {0}")]
    Quadrature(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
