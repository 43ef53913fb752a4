use thiserror::Error;

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] lzqnd_core::Error),

    #[error("verification failed: {0}")]
    Verification(String),
}

impl BenchError {
    pub fn config(msg: impl Into<String>) -> Self {
        BenchError::Config(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// 1 validation, 2 verification failure, 3 runtime invariant violation.
    pub fn exit_code(&self) -> i32 {
        use lzqnd_core::Error as E;
        match self {
            BenchError::Verification(_) => 2,
            BenchError::Core(
                E::InvariantViolation { .. } | E::NormDrift { .. } | E::NonFinite | E::NoConvergence(_),
            ) => 3,
            _ => 1,
        }
    }
}
