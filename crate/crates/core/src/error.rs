use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the scoring pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid phone set: {0}")]
    PhoneSet(String),

    #[error("posteriorgram has {found} phone columns, phone set has {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("frame {frame}: row sums to {sum}, expected 1")]
    RowSum { frame: usize, sum: f64 },

    #[error("frame {frame}, phone {phone}: invalid probability {value}")]
    InvalidProbability {
        frame: usize,
        phone: usize,
        value: f64,
    },

    #[error("posteriorgram must have at least one frame")]
    EmptyPosteriorgram,

    #[error("segment [{start}, {start}+{length}) out of bounds for {frames} frames")]
    SegmentOutOfBounds {
        start: usize,
        length: usize,
        frames: usize,
    },

    #[error("phone index {index} out of range for {size} phones")]
    PhoneIndex { index: usize, size: usize },

    #[error("alignment infeasible: {0}")]
    Infeasible(String),

    #[error("invalid alignment: {0}")]
    InvalidAlignment(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("undefined metric: {0}")]
    Undefined(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sequence of length {len} exceeds maximum {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("training diverged at step {step}: loss is {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("missing duration model: {0}")]
    MissingDuration(&'static str),

    #[error("out-of-vocabulary word '{0}'")]
    OutOfVocabulary(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line tool.
    ///
    /// 1 is reserved for usage errors, which are raised by the argument parser
    /// before any of these variants can occur.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged { .. } | Error::Undefined(_) => 3,
            _ => 2,
        }
    }
}
