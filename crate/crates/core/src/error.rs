use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid symbol: {0}")]
    InvalidSymbol(String),

    #[error("cannot parse {input:?}: {reason}")]
    Parse { input: String, reason: String },

    #[error("point {0} lies outside the closed unit disk")]
    Domain(Complex64),

    #[error("{what} did not converge: {detail}")]
    NonConvergence { what: &'static str, detail: String },

    #[error("basis of size {size} exceeds the limit {limit}")]
    BasisOverflow { size: usize, limit: usize },

    #[error("fit window holds {len} points, at least {min} required")]
    WindowTooShort { len: usize, min: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidSymbol(_)
                | Error::Parse { .. }
                | Error::InvalidInput(_)
                | Error::BasisOverflow { .. }
                | Error::Io(_)
        )
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
