use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum ErpoError {
    /// A precondition on an operation's inputs was violated.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// Categorical sampling was asked to draw from an all-`-inf` weight vector.
    #[error("degenerate distribution: all weights are -inf")]
    DegenerateDistribution,

    /// The E-step softmax had no sequence with finite weight.
    #[error("empty support: no sequence has finite weight")]
    EmptySupport,

    /// Every next-token extension of a prefix has reward -inf.
    #[error("dead prefix at position {position}: all {vocab} extensions have -inf weight")]
    DeadPrefix { position: usize, vocab: usize },

    /// A prefix with -inf reward was extended to a finite reward, which breaks
    /// the telescoping decomposition.
    #[error("reward resurrection: prefix reward is -inf but extended reward {extended} is finite")]
    RewardResurrection { extended: f64 },

    /// A sequence length did not match the fixed generation length.
    #[error("length mismatch: got {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },

    /// An enumeration would exceed the configured budget.
    #[error("enumeration budget exceeded: {requested} sequences > budget {budget}")]
    BudgetExceeded { requested: u128, budget: u64 },

    /// A configuration value failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A checkpoint or map file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ErpoError>;
