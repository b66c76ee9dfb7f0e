use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite argument: {0}")]
    NonFinite(f64),

    #[error("{what} out of domain: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("outside the Plancherel-Rotach regime: N sin^3(tau) = {value:.4} < 1")]
    OutOfRegime { value: f64 },

    #[error("conditioning point x = {x} has non-positive kernel diagonal {diagonal:e}")]
    ConditioningPoint { x: f64, diagonal: f64 },

    #[error("quadrature missed tolerance {tolerance:e}: achieved error estimate {estimate:e}")]
    Tolerance { estimate: f64, tolerance: f64 },

    #[error("tridiagonal eigensolver did not converge within {iterations} iterations")]
    Eigensolver { iterations: usize },

    #[error("particles {i} and {j} collide at {position}")]
    Collision { i: usize, j: usize, position: f64 },

    #[error("step halving exhausted after {depth} levels at t = {time}")]
    StepFailure {
        time: f64,
        depth: u32,
        state: Vec<f64>,
    },

    #[error("empty window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }

    /// True for errors that stem from numerics rather than from user input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Tolerance { .. }
                | Error::Eigensolver { .. }
                | Error::Collision { .. }
                | Error::StepFailure { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(x))
    }
}
