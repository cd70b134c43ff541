use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Grassmann context mismatch: values built over different generator counts")]
    ContextMismatch,

    #[error("not invertible: body is zero")]
    NotInvertible,

    #[error("exp requires a nilpotent argument; nonzero body would need transcendental scalars")]
    NotNilpotent,

    #[error("log requires an argument with body 1")]
    LogRequiresBodyOne,

    #[error("rational square root does not exist for this value")]
    NoRationalSqrt,

    #[error("empty result window: no coefficient can be certified")]
    EmptyWindow,

    #[error("window too small to determine a required coefficient at bidegree ({0}, {1})")]
    WindowTooSmall(u32, u32),

    #[error("parity violation: {0}")]
    ParityViolation(String),

    #[error("ill-founded exponential: infinitely many contributions to one coefficient")]
    IllFoundedExponential,

    #[error("series is not superconformal: first failure at exponent {0} ({1})")]
    NotSuperconformal(i64, String),

    #[error("constant term must be 1 for the square root")]
    SqrtConstantTerm,

    #[error("degenerate odd data: coordinate does not vanish at the puncture")]
    OddDataAtPuncture,

    #[error("generator index {0} exceeds the declared cap {1}")]
    IndexCapExceeded(i64, i64),

    #[error("pole at base point: superprojective denominator has zero body")]
    PoleAtBasePoint,

    #[error("cannot sew at this truncation: {0}")]
    CannotSew(String),

    #[error("central charge must be nonzero")]
    ZeroCentralCharge,

    #[error("weight cutoff too small to close the weight ladder")]
    CutoffTooSmall,

    #[error("scaling operators need 2h to be an integer, got h = {0}")]
    FractionalWeight(String),

    #[error("malformed input at {path}: {msg}")]
    Malformed { path: String, msg: String },

    #[error("validation failed: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
