use std::path::PathBuf;

/// Errors produced across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// A reward weight was negative. The environment subtracts penalty terms
    /// itself, so a negative penalty weight would turn the penalty into a bonus.
    #[error("sign convention violated: weight {name} = {value} (all weights must be >= 0)")]
    SignConvention { name: &'static str, value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("llm client: {0}")]
    Llm(String),

    /// A run stopped early. `partial` holds the metrics up to `step`.
    #[error("run failed at step {step}: {source}")]
    RunFailed {
        step: u64,
        #[source]
        source: Box<Error>,
        partial: Box<crate::ppo::RunMetrics>,
    },

    #[error("missing run directory {0}")]
    MissingRunDir(PathBuf),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
