use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite objective or gradient encountered in {0}")]
    NonFinite(&'static str),

    #[error("backtracking exceeded {0} increases of the Lipschitz estimate")]
    BacktrackLimit(usize),

    #[error("line search failed to find an acceptable step after {0} reductions")]
    LineSearchFailed(usize),

    #[error("restart limit of {0} stages exceeded")]
    RestartLimit(usize),

    #[error("unsupported number of projections {got}; supported values are {supported:?}")]
    UnsupportedProjections { got: usize, supported: Vec<usize> },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
