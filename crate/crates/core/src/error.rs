use std::path::PathBuf;

/// Errors raised anywhere in the library.
///
/// Validation problems (bad configuration, malformed input) are distinguished
/// from numerical failures so that callers can map them to different exit
/// codes; see [`Error::is_numerical`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },

    #[error("size error: {0}")]
    Size(String),

    #[error("estimator did not converge: {0}")]
    NonConvergence(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("identification failure: {0}")]
    Identification(String),

    #[error("numerical error: {0}")]
    Numeric(String),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence(_)
                | Error::Singular(_)
                | Error::Identification(_)
                | Error::Numeric(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        assert!(Error::Singular("x".into()).is_numerical());
        assert!(Error::Numeric("x".into()).is_numerical());
        assert!(!Error::Config("x".into()).is_numerical());
        assert!(!Error::Size("x".into()).is_numerical());
        let p = Error::Parse {
            file: "edges.csv".into(),
            line: 7,
            message: "duplicate edge".into(),
        };
        assert_eq!(p.to_string(), "edges.csv:7: duplicate edge");
        assert!(!p.is_numerical());
    }
}
