use crate::denoise::DenoiseError;
use crate::dsl::ScriptError;
use crate::fit::FitError;
use crate::io::IoError;
use crate::metrics::MetricsError;
use crate::proxy::ProxyError;
use crate::voxel::VoxelError;

/// Process exit code for bad input: unreadable files, schema or script
/// errors, invalid configuration.
pub const EXIT_INPUT: i32 = 2;
/// Process exit code for numerical failure.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Proxy(#[from] ProxyError),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
    #[error(transparent)]
    Denoise(#[from] DenoiseError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Input { path: std::path::PathBuf, message: String },
    #[error("{stage}: {source}")]
    Stage { stage: &'static str, source: Box<Error> },
}

impl Error {
    pub fn input(path: &std::path::Path, err: impl std::fmt::Display) -> Error {
        Error::Input { path: path.to_path_buf(), message: err.to_string() }
    }

    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Fit(FitError::DecompositionFailed) => EXIT_NUMERIC,
            Error::Denoise(DenoiseError::NonFinite(_)) => EXIT_NUMERIC,
            Error::Denoise(DenoiseError::Voxel(_) | DenoiseError::Schedule(_)) => EXIT_INPUT,
            Error::Denoise(_) | Error::Metrics(_) => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Tags errors from one stage with its name.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.into().in_stage(stage))
    }
}
