use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("vertex {vertex} is isolated (zero degree); the normalized Laplacian is undefined")]
    IsolatedVertex { vertex: usize },

    #[error("negative feature value {value} at row {row}, column {col}")]
    NegativeFeature { row: usize, col: usize, value: f64 },

    #[error("index {0} assigned more than once")]
    DuplicateIndex(usize),

    #[error("operation requires the full eigenbasis (m = {n}), got m = {m}")]
    TruncatedBasis { m: usize, n: usize },

    #[error("matrix is not positive semidefinite: eigenvalue {0:.3e}")]
    NotPsd(f64),

    #[error("class {class}: {source}")]
    Class {
        class: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical pipeline itself, as opposed to bad
    /// input or configuration.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonConvergence { .. } | Error::IsolatedVertex { .. } | Error::NotPsd(_) => true,
            Error::Class { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}
