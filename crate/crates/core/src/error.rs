use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A density whose lower bound would drop to zero or below.
    #[error("density bounds violated: {0}")]
    BoundsViolation(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    /// The kernel bandwidth is too small for the grid.
    #[error("kernel under-resolved: {0}")]
    Resolution(String),
    #[error("density has no exact Fourier coefficients")]
    UnsupportedDensity,
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidInput(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
