use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("unknown identifier `{name}` at line {line}, column {col}")]
    UnknownIdent { name: String, line: usize, col: usize },

    #[error("negative rate constant {value} at line {line}")]
    NegativeRate { value: f64, line: usize },

    #[error("propensity of reaction {reaction} evaluates to {value} at state {state}")]
    BadPropensity { reaction: usize, state: String, value: f64 },

    #[error("reaction {reaction} fires at state {state} but leaves the nonnegative orthant")]
    NegativeTarget { reaction: usize, state: String },

    #[error("state enumeration exceeded the cap of {cap} states")]
    StateCap { cap: usize },

    #[error("level function changes by {step} when reaction {reaction} fires at state {state}")]
    LevelStep { state: String, reaction: usize, step: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("stationary solution is not unique: {0}")]
    NonUnique(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("linear program is infeasible: {0}")]
    Infeasible(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by bad user input rather than by the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::UnknownIdent { .. }
                | Error::NegativeRate { .. }
                | Error::Invalid(_)
                | Error::Io(_)
        )
    }
}
