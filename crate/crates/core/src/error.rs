use thiserror::Error;

/// Errors shared across the crate. Numerical results that merely exceed a
/// requested tolerance are not errors; they come back flagged (see
/// [`crate::series::CoefficientResult::flagged`]).
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// Exact integer arithmetic left the 64-bit range.
    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    /// The word reduction did not terminate within the step guard.
    #[error("word reduction exceeded {0} steps")]
    ReductionGuard(usize),

    /// An iterative computation hit its configured cap before reaching the
    /// requested tolerance.
    #[error("{what}: requested {requested:.3e}, achieved {achieved:.3e} at cap")]
    Unconverged {
        what: &'static str,
        requested: f64,
        achieved: f64,
    },

    /// A quadrature rule cannot integrate the polynomial degree the caller
    /// needs exactly.
    #[error("quadrature exactness degree {have} insufficient, need {need}")]
    QuadratureDegree { have: u32, need: u32 },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
