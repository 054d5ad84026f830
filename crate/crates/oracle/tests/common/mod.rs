use dfaguide::aligned::{align, AlignOptions, AlignedAutomaton};
use dfaguide::alphabet::Alphabet;
use dfaguide::compile::{compile_pattern, CompileOptions};
use dfaguide::unigram::UnigramMatrix;
use dfaguide::vocab::Vocabulary;

/// The worked cat/cut instance: the five-state automaton over the
/// single-char vocabulary [a, c, r, t, u] and its unigram matrix.
pub fn figure_instance() -> (AlignedAutomaton, UnigramMatrix) {
    let alphabet = Alphabet::from_str("acrtu").unwrap();
    let dfa = compile_pattern("c(a|u)t", &alphabet, &CompileOptions::default()).unwrap();
    let vocab = Vocabulary::new(alphabet, ["a", "c", "r", "t", "u"], None).unwrap();
    let a = align(&dfa, &vocab, &AlignOptions::default()).unwrap();
    let u = UnigramMatrix::from_rows(&[
        vec![0.1, 0.7, 0.2, 0.0, 0.0],
        vec![0.3, 0.0, 0.1, 0.1, 0.5],
        vec![0.0, 0.2, 0.3, 0.5, 0.0],
    ])
    .unwrap();
    (a, u)
}

/// A random scoring instance within the stated equivalence-suite bounds:
/// char DFA of at most 8 states, vocabulary of at most 8 tokens (multi-char
/// included), sequence length at most 5.
pub fn random_instance(rng: &mut impl rand::Rng) -> (AlignedAutomaton, UnigramMatrix) {
    let alphabet = Alphabet::from_str("abc").unwrap();
    let dfa = dfaguide_oracle::random_dfa(rng, &alphabet, 8);
    let vocab = dfaguide_oracle::random_vocab(rng, &alphabet, 8, 3);
    let a = align(&dfa, &vocab, &AlignOptions::default()).unwrap();
    let l = rng.gen_range(1..=5);
    let u = dfaguide_oracle::random_unigram(rng, l, vocab.len());
    (a, u)
}
