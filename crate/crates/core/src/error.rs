use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("gamma function pole at {at}")]
    Pole { at: f64 },

    #[error("{what}: argument {value} outside the domain")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid stable parameters: {0}")]
    Params(String),

    #[error("path visits the origin (index {index})")]
    Origin { index: usize },

    #[error("clock level {level} exceeds the clock total {total}")]
    Range { level: f64, total: f64 },

    #[error("all importance weights vanish")]
    Degenerate,

    #[error("path never comes within radius {radius}")]
    NoExit { radius: f64 },

    #[error("regime {regime} requires {requirement}")]
    Regime {
        regime: &'static str,
        requirement: &'static str,
    },

    #[error("invalid time grid: {0}")]
    Grid(String),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{0}")]
    Io(String),

    /// The reader of our output went away, as in `... | head`.
    #[error("output closed")]
    OutputClosed,
}

impl Error {
    pub fn domain(what: &'static str, value: f64) -> Self {
        Error::Domain { what, value }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return Error::OutputClosed;
        }
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
