use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no usable traces supplied")]
    EmptyTraces,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("traces disagree on round count: {first} vs {other}")]
    RoundCountMismatch { first: u32, other: u32 },
    #[error("game too short for {what}: {n_rounds} round(s)")]
    ShortGame { what: &'static str, n_rounds: u32 },
    #[error("payoff matrix (T={0}, R={1}, P={2}, S={3}) violates T > R > P > S")]
    InvalidPayoffMatrix(i64, i64, i64, i64),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("beta {0} outside (0, 1)")]
    InvalidBeta(f64),
    #[error("strategy {0} is randomized and has no deterministic prescriptions")]
    RandomStrategy(String),
    #[error("unknown strategy id {0:?}")]
    UnknownStrategy(String),
    #[error("zero variance in correlation input")]
    ZeroVariance,
    #[error("agent {agent} failed at round {round}: {reason}")]
    AgentFailure {
        agent: String,
        round: u32,
        reason: String,
    },
    #[error("no parsable reply object: {0}")]
    ParseFailure(String),
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("http: {0}")]
    Http(String),
    #[error("config: {0}")]
    Config(String),
    #[error("trace schema version {found} unsupported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("line {line}: {message}")]
    JsonlLine { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
