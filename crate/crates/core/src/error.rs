use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context} at index {index}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        index: usize,
        expected: String,
        found: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("weights sum to {sum}, expected 1")]
    InvalidWeights { sum: f64 },

    #[error("pair (A, H) is not detectable: unobservable eigenvalue {re}{im:+}i has modulus {modulus}")]
    NotDetectable { re: f64, im: f64, modulus: f64 },

    #[error("observability Gramian at k={k} has smallest eigenvalue {eigenvalue:e}, below tolerance {tolerance:e}")]
    GramianDegenerate {
        k: usize,
        eigenvalue: f64,
        tolerance: f64,
    },

    #[error("observer gain design failed: {0}")]
    GainDesign(String),

    #[error("no contraction within cap {cap}")]
    NoContraction { cap: usize },

    #[error("quadrature did not converge: estimated error {error:e} after {intervals} intervals")]
    Quadrature { error: f64, intervals: usize },

    #[error("root finding did not converge: {0}")]
    RootFinding(String),

    #[error("convolution would produce {atoms} atoms, above the cap of {cap}")]
    ConvolutionCap { atoms: usize, cap: usize },

    #[error("transport problem is infeasible: {0}")]
    Transport(String),

    #[error("dual infeasible: lambda {lambda} must exceed lambda_max {lambda_max}")]
    DualInfeasible { lambda: f64, lambda_max: f64 },

    #[error("multiplier search did not bracket a minimum below {cap}")]
    LambdaBracket { cap: f64 },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(
        context: &'static str,
        index: usize,
        expected: impl ToString,
        found: impl ToString,
    ) -> Self {
        Error::Dimension {
            context,
            index,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
