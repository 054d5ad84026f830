//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by automaton construction, scoring, and the diffusion
/// pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("regex syntax error at byte {position}: {message}")]
    RegexSyntax { position: usize, message: String },

    #[error("character {0:?} is not in the declared alphabet")]
    CharOutsideAlphabet(char),

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("state cap exceeded: construction needs more than {cap} states")]
    StateCapExceeded { cap: usize },

    #[error("transition cap exceeded: alignment needs more than {cap} transitions")]
    TransitionCapExceeded { cap: usize },

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid unigram matrix: {0}")]
    InvalidUnigram(String),

    #[error("token id {0} out of range")]
    InvalidTokenId(usize),

    #[error("state id {0} out of range")]
    InvalidStateId(usize),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported format version: expected {expected:?}, found {found:?}")]
    FormatVersion { expected: String, found: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
