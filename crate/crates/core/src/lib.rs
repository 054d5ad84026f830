//! Regex-constrained generation for continuous text diffusion models.
//!
//! The pipeline, end to end:
//!
//! 1. [`regex`] / [`compile`] — parse a regex dialect and compile it to a
//!    minimized character-level DFA.
//! 2. [`aligned`] — lift the DFA to a token-level automaton that accepts
//!    every tokenization of every accepted string.
//! 3. [`acceptance`] — compute the probability that a sequence drawn from a
//!    decoded unigram matrix is accepted, plus the exact gradient, in
//!    log-scaled form.
//! 4. [`diffusion`] — a small embedding-space denoising diffusion model whose
//!    sampling loop can be steered by that gradient (classifier-style
//!    guidance with an analytic score instead of a trained classifier).
//! 5. [`bench`] — natural-language regex templates and satisfaction /
//!    pass@k evaluation.
//!
//! See the crate's `examples/` directory for a runnable tour of each piece.

pub mod acceptance;
pub mod aligned;
pub mod alphabet;
pub mod bench;
pub mod compile;
pub mod diffusion;
pub mod dfa;
pub mod error;
pub mod regex;
pub mod textio;
pub mod toy;
pub mod unigram;
pub mod vocab;

pub use acceptance::{
    expected_probability, expected_probability_with_grad, log_grad_wrt_unigram, AcceptanceResult,
};
pub use aligned::{align, AlignOptions, AlignedAutomaton};
pub use alphabet::Alphabet;
pub use compile::{compile, compile_pattern, minimize, CompileOptions};
pub use dfa::{Dfa, StateId};
pub use error::{Error, Result};
pub use regex::{parse_regex, RegexAst};
pub use unigram::UnigramMatrix;
pub use vocab::{TokenId, Vocabulary};
