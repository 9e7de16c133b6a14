use thiserror::Error;

/// Errors raised by panel ingestion, estimation and inference.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("ragged panel: {0}")]
    RaggedPanel(String),

    #[error("policy violation at unit {unit}, period {period}: {reason}")]
    PolicyViolation {
        unit: usize,
        period: usize,
        reason: String,
    },

    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("truncation window {window} too large for horizon {horizon}")]
    WindowTooLarge { window: usize, horizon: usize },

    #[error("singular design: reciprocal condition number {rcond:e}")]
    SingularDesign { rcond: f64 },

    #[error("no observations with positive kernel weight")]
    NoSupport,

    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),

    #[error("singular side Gram on the {side} side")]
    SingularSide { side: &'static str },

    #[error("negative variance estimate {0:e}")]
    NegativeVariance(f64),

    #[error("insufficient support: {0}")]
    InsufficientSupport(String),

    #[error("running variable has zero spread")]
    DegenerateSpread,
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn name(&self) -> &'static str {
        match self {
            Error::MalformedRow { .. } => "MalformedRow",
            Error::RaggedPanel(_) => "RaggedPanel",
            Error::PolicyViolation { .. } => "PolicyViolation",
            Error::IoFailure(_) => "IoFailure",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::WindowTooLarge { .. } => "WindowTooLarge",
            Error::SingularDesign { .. } => "SingularDesign",
            Error::NoSupport => "NoSupport",
            Error::DegenerateDenominator(_) => "DegenerateDenominator",
            Error::SingularSide { .. } => "SingularSide",
            Error::NegativeVariance(_) => "NegativeVariance",
            Error::InsufficientSupport(_) => "InsufficientSupport",
            Error::DegenerateSpread => "DegenerateSpread",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
