use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration value is invalid. `key` is the dotted path of the offending field.
    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A numerical failure during a run (divergence, singular system, violated monotonicity).
    #[error("numerical failure at round {round}{}: {message}", machine.map(|m| format!(", machine {m}")).unwrap_or_default())]
    Numerical {
        round: usize,
        machine: Option<usize>,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn numerical(round: usize, machine: Option<usize>, message: impl Into<String>) -> Self {
        Error::Numerical {
            round,
            machine,
            message: message.into(),
        }
    }

    /// Prefixes the key of a configuration error, e.g. `d` becomes `problem.d`.
    pub fn within(self, prefix: &str) -> Self {
        match self {
            Error::Config { key, message } => Error::Config {
                key: format!("{prefix}.{key}"),
                message,
            },
            other => other,
        }
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
