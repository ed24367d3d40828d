use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is out of range, mis-shaped or non-finite.
    #[error("invalid input: {0}")]
    Input(String),

    /// A checked precondition (symmetry, squareness, ...) does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("vertex {0} has zero degree")]
    DegenerateDegree(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Malformed text file or inconsistent dataset files.
    #[error("format error: {0}")]
    Format(String),

    #[error("diverged: {0}")]
    Diverged(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
