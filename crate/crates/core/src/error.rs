use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation (e.g. ε ≤ 0, b = 0).
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested combination is well-defined mathematically but not
    /// computable here (e.g. a refined bound on a modulus without factorization).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A precondition of a test oracle was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A spec string (modulus, counter function, space, rational) failed to parse.
    #[error("cannot parse {what} from {input:?}: {reason}")]
    Parse {
        what: &'static str,
        input: String,
        reason: String,
    },

    /// An index exceeded the trajectory cap.
    #[error("trajectory cap exceeded: index {requested} > cap {cap}")]
    CapExceeded { requested: usize, cap: usize },

    /// An exact iteration outgrew the decimal digit budget.
    #[error("digit budget of {budget} exceeded after {steps} of {total} iterations")]
    BudgetExceeded {
        budget: u64,
        steps: u64,
        total: String,
        /// Decimal digits of the last iterate that was still within budget.
        last_digits: u64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(what: &'static str, input: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            what,
            input: input.to_string(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
