use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid probability vector: {0}")]
    InvalidSimplex(String),

    #[error("invalid logits: {0}")]
    InvalidLogits(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A measure/rule pairing that has no definition, e.g. anything built on
    /// the zero-one central prediction.
    #[error("undefined measure: {0}")]
    Undefined(String),

    #[error("log central prediction undefined: no class has positive mass in every member")]
    LogCentralUndefined,

    #[error("spherical central prediction undefined: |m| = {0} >= 1")]
    SphericalCentralUndefined(f64),

    #[error("AUROC needs at least one positive and one negative (got {n_pos} positive, {n_neg} negative)")]
    OneClass { n_pos: usize, n_neg: usize },

    #[error("degenerate misclassification task: {0}")]
    DegenerateLabels(String),

    #[error("NaN encountered in {0}")]
    NaN(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
