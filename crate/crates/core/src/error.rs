use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("not a *-subalgebra: {0}")]
    NotASubalgebra(String),
    #[error("not positive: {0}")]
    NotPositive(String),
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("not a compact quantum group: {0}")]
    NotACqg(String),
    #[error("invalid *-morphism: {0}")]
    InvalidMorphism(String),
    #[error("embedding invalid: {axiom} fails ({detail})")]
    EmbeddingInvalid { axiom: &'static str, detail: String },
    #[error("Haar-incompatible expectation: {0}")]
    HaarIncompatible(String),
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),
    #[error("estimated dimension {estimate} exceeds the cap {cap}")]
    SizeLimit { estimate: usize, cap: usize },
    #[error("word of length {length} exceeds truncation length {max}")]
    Truncation { length: usize, max: usize },
    #[error("elements belong to different HNN contexts")]
    ContextMismatch,
    #[error("elements belong to different algebras ({left} vs {right})")]
    AlgebraMismatch { left: u64, right: u64 },
    #[error("lemma violation: {0}")]
    LemmaViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
