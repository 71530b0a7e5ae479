use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hyperparameter `{name}`: {reason}")]
    InvalidHyperParam { name: &'static str, reason: String },

    #[error("parameter group set is empty")]
    EmptyGroups,

    #[error("parameter group `{0}` has zero dimension")]
    ZeroDim(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in group `{group}`")]
    NonFiniteGradient { group: String },

    #[error("non-finite parameter in group `{group}` after step {step}")]
    NonFiniteParams { group: String, step: u64 },

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: u64 },

    #[error("cannot project onto tangent space of zero vector")]
    ZeroTheta,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
