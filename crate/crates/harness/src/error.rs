use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const DISCARDED_INIT: u8 = 2;
    pub const VERIFICATION_FAILURE: u8 = 3;
    pub const USAGE: u8 = 4;
    pub const NUMERICAL: u8 = 5;
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] csisa_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(#[from] toml::de::Error),

    #[error("{} trial(s) errored: {}", .0.len(), summarize(.0))]
    TrialsFailed(Vec<(usize, String)>),
}

fn summarize(failures: &[(usize, String)]) -> String {
    failures
        .iter()
        .take(5)
        .map(|(i, msg)| format!("#{i} {msg}"))
        .collect::<Vec<_>>()
        .join("; ")
}

impl HarnessError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        use csisa_core::Error as E;
        match self {
            Self::Usage(_) | Self::Io { .. } | Self::Json(_) | Self::Csv(_) | Self::Config(_) => {
                exit::USAGE
            }
            Self::Core(
                E::InvalidDimensions { .. }
                | E::DimensionMismatch { .. }
                | E::InvalidK { .. }
                | E::Parse(_)
                | E::Io(_),
            ) => exit::USAGE,
            Self::Core(_) | Self::TrialsFailed(_) => exit::NUMERICAL,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
