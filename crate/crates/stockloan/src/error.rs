//! Error types shared across the crate.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by parameter validation, valuation, and the numerical
/// cross-check engines.
#[derive(Debug)]
pub enum Error {
    /// A field invariant on the market or loan parameters is violated.
    Parameter(String),
    /// The parameters fall outside the admissible rate/dividend regimes.
    RegimeViolation(String),
    /// The up-front economics admit an arbitrage: s0 - q + c <= 0.
    ArbitrageViolation { s0: f64, q: f64, c: f64 },
    /// An evaluation point is outside the domain of the operation.
    Domain(String),
    /// The finite-difference grid violates a solver safeguard.
    Grid(String),
    /// The iterative solver exhausted its iteration budget.
    NonConvergence { iterations: usize, residual: f64 },
    /// A simulation or CLI configuration value is unusable.
    Config(String),
    /// Root finding could not bracket the requested target.
    NoBracket(String),
    /// File I/O failure, annotated with the path involved.
    Io { path: String, source: std::io::Error },
}

impl Error {
    /// Short machine-parsable tag, used as the prefix of CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::RegimeViolation(_) => "regime-violation",
            Error::ArbitrageViolation { .. } => "arbitrage-violation",
            Error::Domain(_) => "domain",
            Error::Grid(_) => "grid",
            Error::NonConvergence { .. } => "non-convergence",
            Error::Config(_) => "config",
            Error::NoBracket(_) => "no-bracket",
            Error::Io { .. } => "io",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parameter(msg) => write!(f, "{msg}"),
            Error::RegimeViolation(msg) => write!(f, "{msg}"),
            Error::ArbitrageViolation { s0, q, c } => write!(
                f,
                "no-arbitrage condition s0 - q + c > 0 violated: {s0} - {q} + {c} = {}",
                s0 - q + c
            ),
            Error::Domain(msg) => write!(f, "{msg}"),
            Error::Grid(msg) => write!(f, "{msg}"),
            Error::NonConvergence { iterations, residual } => write!(
                f,
                "solver did not converge after {iterations} iterations (best residual {residual:e})"
            ),
            Error::Config(msg) => write!(f, "{msg}"),
            Error::NoBracket(msg) => write!(f, "{msg}"),
            Error::Io { path, source } => write!(f, "{path}: {source}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
