use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("unsupported jet shape: order {order}, dim {dim} (order must be 1..=3, dim 1..=3)")]
    UnsupportedShape { order: usize, dim: usize },

    #[error(
        "jet shape mismatch: (order {a_order}, dim {a_dim}) vs (order {b_order}, dim {b_dim})"
    )]
    ShapeMismatch {
        a_order: usize,
        a_dim: usize,
        b_order: usize,
        b_dim: usize,
    },

    #[error("{function} is undefined at {value}")]
    DomainViolation { function: &'static str, value: f64 },

    #[error("{what} needs jet order >= {required}, got {actual}")]
    InsufficientOrder {
        what: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("point {point:?} lies outside the closure of the domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("quadrature target {target} is not supported on {domain}")]
    UnsupportedTarget { target: String, domain: String },

    #[error("non-finite integrand value {value} at node {node:?}")]
    NonFinite { node: Vec<f64>, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing quadrature rule: {0}")]
    MissingRule(&'static str),

    #[error("non-finite gradient entry {value} at parameter {index}")]
    NonFiniteGradient { index: usize, value: f64 },

    #[error("training diverged at step {step}: loss {loss} exceeds limit {limit}")]
    Divergence { step: usize, loss: f64, limit: f64 },

    #[error("certified bound violated at step {step}: error {error} > bound {bound}")]
    BoundViolation { step: usize, error: f64, bound: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed parameter file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
