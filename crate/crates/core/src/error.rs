use std::path::PathBuf;

/// Errors raised by model construction, the solvers and the experiment layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid parameters: bounds, regularization weights, counts.
    #[error("configuration error: {0}")]
    Config(String),

    /// Data violating a precondition (negative counts, all-zero signal, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// A linear solve or iteration broke down.
    #[error("numerical failure: {message} (condition estimate {condition:e})")]
    Numerical { message: String, condition: f64 },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV {}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            found,
        })
    }
}
