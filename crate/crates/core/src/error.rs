use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),

    #[error("modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: u32, right: u32 },

    #[error("zero has no multiplicative inverse")]
    InverseOfZero,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is singular")]
    Singular,

    #[error("matrix is rank deficient: rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("invalid code: {0}")]
    InvalidCode(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid association: {0}")]
    InvalidAssociation(String),

    #[error("message index {d} out of range 1..={k}")]
    IndexOutOfRange { d: usize, k: usize },

    #[error("enumeration of {required} cases exceeds budget {budget}; use the randomized probe")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("expected count {numerator}/{denominator} is not an integer")]
    NonIntegralCount { numerator: u128, denominator: u128 },

    #[error("frame error: {0}")]
    Frame(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
}
