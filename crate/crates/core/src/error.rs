use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("W_1(1) has infinite variance (m(2) = {m2})")]
    InfiniteVariance { m2: f64 },
    #[error("population cap exceeded at level {level}: {count} individuals > cap {cap}")]
    PopulationCapExceeded { level: u32, count: usize, cap: usize },
    #[error("trajectory depth {have} is insufficient, need {need}")]
    InsufficientDepth { need: u32, have: u32 },
    #[error("empty sample")]
    EmptySample,
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("tree is extinct at level {level}")]
    ExtinctTree { level: u32 },
    #[error("renewal regime mismatch: {0}")]
    RegimeMismatch(String),
    #[error("total variance is zero")]
    ZeroVariance,
    #[error("third-moment series did not converge within {iterations} terms")]
    DivergentThirdMoments { iterations: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
