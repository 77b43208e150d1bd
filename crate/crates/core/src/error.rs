use std::fmt;

use thiserror::Error;

use crate::linalg::C64;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Pipeline stage a numerical failure was raised in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Sampling,
    Pencil,
    Reduction,
    Gram,
    Transform,
    Encode,
    Quantize,
    Allocate,
    Parse,
    Dequantize,
    Decode,
    InverseTransform,
    Evaluate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Sampling => "sampling",
            Stage::Pencil => "pencil assembly",
            Stage::Reduction => "order reduction",
            Stage::Gram => "frequency gram",
            Stage::Transform => "basis transform",
            Stage::Encode => "encode",
            Stage::Quantize => "quantize",
            Stage::Allocate => "bit allocation",
            Stage::Parse => "payload parse",
            Stage::Dequantize => "dequantize",
            Stage::Decode => "decode",
            Stage::InverseTransform => "inverse transform",
            Stage::Evaluate => "realization evaluation",
        };
        f.write_str(name)
    }
}

/// Coarse classification of an [`Error`], used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Format,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Two sample frequencies (or a frequency and a pole) coincide exactly.
    #[error("singularity: {0}")]
    Singular(String),

    #[error("frequency {freq} is within tolerance of pole {index} ({pole})")]
    NearPole { index: usize, freq: f64, pole: C64 },

    #[error(
        "ill-conditioned E1: smallest singular value {sigma_min:e} is {ratio:e} of the largest"
    )]
    IllConditioned { sigma_min: f64, ratio: f64 },

    #[error(
        "A2 is not safely diagonalizable: eigenvector condition number {cond:e} exceeds {limit:e}"
    )]
    Defective { cond: f64, limit: f64 },

    #[error("rank deficient: smallest singular value {sigma_min:e} vs largest {sigma_max:e}")]
    RankDeficient { sigma_min: f64, sigma_max: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("codec has not been trained")]
    Untrained,

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Dimension(_) | Error::Untrained => ErrorKind::Config,
            Error::Format { .. } => ErrorKind::Format,
            Error::Io(_) => ErrorKind::Io,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Numerical,
        }
    }

    /// Innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

/// Attach a stage label to an error.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
