use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] lgtm_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("png encode: {0}")]
    PngEncode(#[from] png::EncodingError),

    #[error("png decode: {0}")]
    PngDecode(#[from] png::DecodingError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    /// A file parsed but violates its format contract.
    #[error("format: {0}")]
    Format(String),

    #[error("unknown backend {0:?} (expected \"mock\" or \"adapter:<name>\")")]
    UnknownBackend(String),

    #[error("backend {name} unavailable: {reason}")]
    BackendUnavailable { name: String, reason: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}
