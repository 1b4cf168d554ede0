use thiserror::Error;

/// Errors raised by the library. Infeasible optimization problems are not
/// errors; they are reported through [`crate::Feasibility`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mode {0} is the outage mode and has no BER model")]
    InvalidMode(usize),

    #[error("BER target {target} exceeds fit amplitude {fit_a} of mode {mode}; threshold would be negative")]
    NegativeThreshold { mode: usize, target: f64, fit_a: f64 },

    #[error("invalid AMC table: {0}")]
    InvalidTable(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("region {0} has mass below the floor; conditional averages are undefined")]
    UndefinedConditional(usize),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("accounting drift: {0}")]
    ConsistencyFault(String),

    #[error("cannot merge reports: {0}")]
    Merge(String),

    #[error("configuration error at {key} (line {line}): {message}")]
    Config {
        key: String,
        line: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short machine-readable category used by the CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidMode(_) => "invalid-mode",
            Error::NegativeThreshold { .. } => "negative-threshold",
            Error::InvalidTable(_) => "invalid-table",
            Error::Domain(_) => "domain",
            Error::Resource(_) => "resource",
            Error::Quadrature(_) => "quadrature",
            Error::UndefinedConditional(_) => "undefined-conditional",
            Error::ContractViolation(_) => "contract-violation",
            Error::ConsistencyFault(_) => "consistency-fault",
            Error::Merge(_) => "merge",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
