use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("arity {arity} outside supported range [{min}, {max}]")]
    Arity { arity: usize, min: usize, max: usize },
    #[error("n = {n} exceeds the configured maximum {max}")]
    TooLarge { n: usize, max: usize },
    #[error("shift on odd index {0}")]
    OddShift(usize),
    #[error("label {0} is not a tail of the tree")]
    NotATail(u32),
    #[error("label {0} already present")]
    LabelCollision(u32),
    #[error("stable trees need at least 3 tails, got {0}")]
    TooFewTails(usize),
    #[error("model has no flat identity")]
    MissingIdentity,
    #[error("model has no Euler data")]
    MissingEuler,
    #[error("Euler weights of the identity differ: {0} vs {1}")]
    EulerMismatch(String, String),
    #[error("algebra is not semisimple at the requested point")]
    NotSemisimple,
    #[error("canonical coordinates collide at index pairs {0:?}")]
    NotTame(Vec<(usize, usize)>),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("C3 must equal 1 for the U-transform, got {0}")]
    NotNormalized(String),
}

pub type Result<T> = std::result::Result<T, Error>;
