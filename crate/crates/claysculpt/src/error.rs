use std::path::PathBuf;

use claysculpt_core::planner::LoopAbort;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] claysculpt_core::Error),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    /// An input file that does not parse.
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    /// A run directory or log that is not what `sculpt` writes.
    #[error("malformed run output {path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Loop(#[from] LoopAbort),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(e) if e.is_invalid_input() => 1,
            Error::Read { .. } | Error::Parse { .. } | Error::Usage(_) => 1,
            Error::Core(_) | Error::Write { .. } | Error::Malformed { .. } | Error::Loop(_) => 2,
        }
    }
}
