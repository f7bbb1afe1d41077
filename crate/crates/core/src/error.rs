use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// Malformed or out-of-contract input (bad vertex ids, degree cap exceeded,
    /// missing lists, ...).
    #[error("input error: {0}")]
    Input(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Misuse of an API (nested passes, unknown names, ...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A bound that the analysis guarantees did not hold. Always an
    /// implementation bug.
    #[error("theory violation: {0}")]
    TheoryViolation(String),

    #[error("palette overflow: {0}")]
    PaletteOverflow(String),

    #[error("query failed: {0}")]
    QueryFail(String),

    #[error("adversary disqualified: {0}")]
    Adversary(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}

pub(crate) fn theory<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::TheoryViolation(msg.into()))
}
