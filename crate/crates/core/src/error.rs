use crate::model::{Time, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown {kind} label `{label}` at time {time}")]
    UnknownLabel {
        kind: &'static str,
        label: String,
        time: Time,
    },

    #[error("index out of range: {0}")]
    Range(String),

    #[error("invalid model: {0}")]
    InvalidModel(ValidationReport),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("strategy has no decision for {0}")]
    StrategyDomain(String),

    #[error("bundle is missing scenario {0}")]
    MissingScenario(String),

    #[error("enumeration too large: {count} candidates exceed the budget of {budget}")]
    EnumerationTooLarge { count: u128, budget: u128 },

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("no resilient strategy from state `{state}` at time {time}")]
    NoResilientStrategy { state: String, time: Time },

    #[error("{location}: {message}")]
    Parse { location: String, message: String },

    #[error("cross-reference error: {0}")]
    CrossReference(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
