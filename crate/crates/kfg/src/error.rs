use std::io;
use std::path::PathBuf;
use std::time::Duration;

use kfg_core::cluster::ClusterError;
use kfg_core::cost::CostError;
use kfg_core::framediff::FrameError;
use kfg_core::model::ModelError;
use kfg_core::pipeline::PipelineError;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: not found", .0.display())]
    NotFound(PathBuf),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no records")]
    NoRecords,
    #[error("unsupported version {found:?}, expected {expected:?}")]
    Version { expected: &'static str, found: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("frame {frame}: {message}")]
    Image { frame: usize, message: String },
    #[error("frames directory {}: {message}", dir.display())]
    Frames { dir: PathBuf, message: String },
    #[error("detector exited with {status}: {output}")]
    Detector { status: String, output: String },
    #[error("detector timed out after {0:?}")]
    Timeout(Duration),
    #[error("invalid detector contract: {0}")]
    Contract(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("review bundle: {0}")]
    Bundle(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        let path = path.into();
        if source.kind() == io::ErrorKind::NotFound {
            return Error::NotFound(path);
        }
        Error::Io { path, source }
    }

    /// Short machine-readable category used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::NotFound(_) => "not-found",
            Error::Parse { .. } | Error::NoRecords => "parse",
            Error::Version { .. } | Error::Schema { .. } => "schema",
            Error::Image { .. } | Error::Frames { .. } | Error::Frame(_) => "frames",
            Error::Detector { .. } => "detector",
            Error::Timeout(_) => "timeout",
            Error::Contract(_) => "contract",
            Error::Config(_) => "config",
            Error::Usage(_) => "usage",
            Error::Bundle(_) => "bundle",
            Error::Model(_) => "model",
            Error::Pipeline(_) => "pipeline",
            Error::Cluster(_) => "cluster",
            Error::Cost(_) => "cost",
        }
    }
}
