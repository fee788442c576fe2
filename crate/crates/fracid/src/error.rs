use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Gamma pole at x = {0}")]
    Pole(f64),
    #[error("Gamma overflow at x = {0}")]
    Overflow(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("series is singular at t = 0 (term with exponent {0})")]
    SingularAtZero(f64),
    #[error("series would exceed {0} terms")]
    TooManyTerms(usize),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invariant violated: {what} (residual {residual:e})")]
    InvariantViolation { what: String, residual: f64 },
    #[error("Jacobi degree {0} exceeds the cap of 12")]
    DegreeTooHigh(usize),
    #[error("normal equations are ill-conditioned for sigma = {0:e}")]
    IllConditioned(f64),
    #[error("logarithm of zero at t = {0}")]
    LogOfZero(f64),
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("degenerate ratio at t = {0}")]
    RatioDegenerate(f64),
    #[error("no valid candidates in the selection grid")]
    NoValidCandidates,
    #[error("kernel K0 vanishes at t = 0")]
    KernelVanishesAtZero,
    #[error("missing constant: {0}")]
    MissingConstant(String),
    #[error("wrong branch: {0}")]
    WrongBranch(String),
    #[error("epsilon {value} outside admissible interval ({lo}, {hi})")]
    EpsilonOutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("input mismatch: {0}")]
    InputMismatch(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
