use std::path::PathBuf;

use crate::reference::Reference;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] tvnest::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("reference solve stopped after {iters} iterations without reaching its tolerance (phi = {phi})")]
    ReferenceNotConverged {
        iters: usize,
        phi: f64,
        partial: Box<Reference>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Attaches a path to an I/O error.
pub trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| Error::Io {
            path: path.into(),
            source,
        })
    }
}

impl<T> IoContext<T> for tvnest::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|e| match e {
            tvnest::Error::Io(source) => Error::Io {
                path: path.into(),
                source,
            },
            other => Error::Core(other),
        })
    }
}
