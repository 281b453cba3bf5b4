use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("arity mismatch: {0}")]
    ArityMismatch(String),

    #[error("variable index {index} out of range for arity {arity}")]
    IndexOutOfRange { index: usize, arity: usize },

    #[error("domain error in `{expr}`: {kind}")]
    Domain { expr: String, kind: DomainKind },

    #[error("expression is not polynomial: {0}")]
    NonPolynomial(String),

    #[error("series shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("germ has nonzero constant term {0}")]
    NonzeroConstant(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("family shape validation failed: {0}")]
    FamilyShape(String),

    #[error("validation failed: {what} (residual {residual:e} > {tolerance:e})")]
    Validation {
        what: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("trajectory left the domain box at t = {t}")]
    TrajectoryExit { t: f64 },

    #[error("step underflow: integrator could not reach tolerance {tolerance:e} (estimate {estimate:e})")]
    StepUnderflow { tolerance: f64, estimate: f64 },

    #[error("extrapolation did not converge: {0}")]
    Extrapolation(String),

    #[error("quadrature did not converge on [{a}, {b}] (error estimate {estimate:e})")]
    Quadrature { a: f64, b: f64, estimate: f64 },

    #[error("root bracket failure: {0}")]
    Bracket(String),

    #[error("integration path from {from} to {to} crosses a zero of alpha")]
    RestPointCrossing { from: f64, to: f64 },

    #[error("diffeomorphism is not in V(alpha): {0}")]
    NotInV(String),

    #[error("embedding criterion violated: margin {margin:e}")]
    EmbeddingViolated { margin: f64 },

    #[error("diffeomorphism moves exceptional value {level}: image {image}")]
    ExceptionalValueMoved { level: f64, image: f64 },

    #[error("coherency failure near level {level}: {residual:e}")]
    Coherency { level: usize, residual: f64 },

    #[error("non-monotone segment: {0}")]
    NonMonotone(String),

    #[error("configuration point not in the distinguished component")]
    NotInComponent,

    #[error("root isolation failure: {0}")]
    RootIsolation(String),

    #[error("model file: {0}")]
    Model(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    DivisionByZero,
    LogNonPositive,
    NonFinite,
}

impl std::fmt::Display for DomainKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DomainKind::DivisionByZero => write!(f, "division by zero"),
            DomainKind::LogNonPositive => write!(f, "log of a non-positive value"),
            DomainKind::NonFinite => write!(f, "non-finite value"),
        }
    }
}
