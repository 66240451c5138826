use thiserror::Error;

/// Errors produced anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {what} = {value} is outside the admissible range")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid basis specification: {0}")]
    InvalidSpec(String),

    #[error("polynomial degree {0} is too large for exact coefficient generation (limit 30)")]
    DegreeTooLarge(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("syntax error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("expression evaluated to a non-finite value at (x={x}, t={t})")]
    NonFinite { x: f64, t: f64 },

    #[error("invalid problem:\n  {}", .0.join("\n  "))]
    InvalidProblem(Vec<String>),

    #[error("compatibility check failed: {condition} (worst violation {violation:.3e} at t={t})")]
    Compatibility {
        condition: String,
        violation: f64,
        t: f64,
    },

    #[error("unknown built-in example id {0}")]
    UnknownExample(u32),

    #[error("vertex closure denominator {value:.3e} is below the guard at t={t}")]
    SingularDenominator { t: f64, value: f64 },

    #[error("singular linear system in {context} (pivot ratio {ratio:.3e})")]
    SingularSystem { context: String, ratio: f64 },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
