use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the formula it feeds.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("total internal reflection at the spherical surface (1 - n^2(1 - c^2) = {0:.3e})")]
    TotalInternalReflection(f64),

    #[error("ray misses the lens: {0}")]
    ApertureMiss(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("degenerate channel: every channel row is zero")]
    DegenerateChannel,

    #[error("regularized channel Gram system is numerically singular")]
    SingularSystem,

    #[error("users {first} and {second} share dominant beam {beam}")]
    DominantBeamCollision {
        beam: usize,
        first: usize,
        second: usize,
    },

    /// The requested scheme is refused at this problem size.
    #[error("scale error: {0}")]
    Scale(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
