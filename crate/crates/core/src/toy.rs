//! Standard toy-scale fixtures: a word-token vocabulary, synthetic corpora,
//! and the benchmark suite used by the examples and the end-to-end tests.

use rand::{seq::SliceRandom, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alphabet::Alphabet;
use crate::bench::{BenchmarkCase, TemplateKind};
use crate::error::Result;
use crate::vocab::{TokenId, Vocabulary};

/// Pad character; excluded from the benchmark word class.
pub const PAD_CHAR: char = '#';

/// Words available to the toy model and the templates, with a spread of
/// lengths so word-length constraints are satisfiable.
pub const WORD_POOL: [&str; 18] = [
    "ox", "up", "cat", "dog", "sun", "sky", "red", "fox", "tree", "rain", "star", "moon", "ship",
    "gold", "cloud", "grass", "forest", "window",
];

/// Lowercase letters, space and the pad character.
pub fn standard_alphabet() -> Alphabet {
    Alphabet::from_str("abcdefghijklmnopqrstuvwxyz #").unwrap()
}

/// One token per pool word, a space token, and a designated pad token.
pub fn standard_vocab() -> Vocabulary {
    let mut tokens: Vec<String> = WORD_POOL.iter().map(|w| w.to_string()).collect();
    tokens.push(" ".into());
    tokens.push(PAD_CHAR.to_string());
    let pad = tokens.len() - 1;
    Vocabulary::new(standard_alphabet(), tokens, Some(pad)).unwrap()
}

/// Token sequence for a sentence of pool words, padded to `seq_len`.
pub fn sentence_tokens(words: &[&str], vocab: &Vocabulary, seq_len: usize) -> Result<Vec<TokenId>> {
    let space = vocab.id_of(" ").expect("space token");
    let mut ids = Vec::new();
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            ids.push(space);
        }
        ids.push(
            vocab
                .id_of(w)
                .ok_or_else(|| crate::error::Error::InvalidVocabulary(format!("no token {w:?}")))?,
        );
    }
    vocab.pad_to(ids, seq_len)
}

/// Random sentences of `min_words..=max_words` pool words, padded to
/// `seq_len` tokens.
pub fn random_corpus(
    sentences: usize,
    min_words: usize,
    max_words: usize,
    vocab: &Vocabulary,
    seq_len: usize,
    seed: u64,
) -> Result<Vec<Vec<TokenId>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = Vec::with_capacity(sentences);
    for _ in 0..sentences {
        let n = rng.gen_range(min_words..=max_words);
        let words: Vec<&str> = (0..n)
            .map(|_| *WORD_POOL.choose(&mut rng).unwrap())
            .collect();
        corpus.push(sentence_tokens(&words, vocab, seq_len)?);
    }
    Ok(corpus)
}

/// Random sentences with balanced word usage: words are drawn from a
/// reshuffled bag of the whole pool, so every pool word appears nearly
/// equally often. Constraint words are never starved this way.
pub fn balanced_corpus(
    sentences: usize,
    min_words: usize,
    max_words: usize,
    vocab: &Vocabulary,
    seq_len: usize,
    seed: u64,
) -> Result<Vec<Vec<TokenId>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bag: Vec<&str> = Vec::new();
    let mut corpus = Vec::with_capacity(sentences);
    for i in 0..sentences {
        let n = min_words + (i % (max_words - min_words + 1));
        let mut words = Vec::with_capacity(n);
        for _ in 0..n {
            if bag.is_empty() {
                bag = WORD_POOL.to_vec();
                bag.shuffle(&mut rng);
            }
            words.push(bag.pop().unwrap());
        }
        corpus.push(sentence_tokens(&words, vocab, seq_len)?);
    }
    Ok(corpus)
}

/// Corpus in which sentences starting with `word_a` outnumber sentences
/// starting with `word_b` by `count_a : count_b`, plus unrelated filler
/// sentences. Used for checking that guiding with the union constraint
/// keeps the branch ratio.
pub fn ratio_corpus(
    word_a: &str,
    word_b: &str,
    count_a: usize,
    count_b: usize,
    count_other: usize,
    vocab: &Vocabulary,
    seq_len: usize,
    seed: u64,
) -> Result<Vec<Vec<TokenId>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filler: Vec<&str> = WORD_POOL
        .iter()
        .copied()
        .filter(|w| *w != word_a && *w != word_b)
        .collect();
    let mut corpus = Vec::new();
    let lead_sentence = |lead: &'_ str, rng: &mut ChaCha8Rng| -> Vec<String> {
        let n = rng.gen_range(2..=4);
        let mut words = vec![lead.to_string()];
        for _ in 0..n {
            words.push(filler.choose(rng).unwrap().to_string());
        }
        words
    };
    for _ in 0..count_a {
        let words = lead_sentence(word_a, &mut rng);
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        corpus.push(sentence_tokens(&refs, vocab, seq_len)?);
    }
    for _ in 0..count_b {
        let words = lead_sentence(word_b, &mut rng);
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        corpus.push(sentence_tokens(&refs, vocab, seq_len)?);
    }
    for _ in 0..count_other {
        let n = rng.gen_range(3..=5);
        let words: Vec<&str> = (0..n).map(|_| *filler.choose(&mut rng).unwrap()).collect();
        corpus.push(sentence_tokens(&words, vocab, seq_len)?);
    }
    Ok(corpus)
}

/// The 12-case benchmark suite: two instances of each template kind, with
/// parameters kept inside what a 16-token sequence can express.
pub fn standard_suite(seed: u64) -> Vec<BenchmarkCase> {
    let alphabet = standard_alphabet();
    let exclude = PAD_CHAR.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng| *WORD_POOL.choose(rng).unwrap();
    let pick_two = |rng: &mut ChaCha8Rng| -> (String, String) {
        let a = pick(rng);
        loop {
            let b = pick(rng);
            if b != a {
                return (a.to_string(), b.to_string());
            }
        }
    };

    let mut cases = Vec::with_capacity(12);
    let mut case = |id: String, kind, words, n, rng: &mut ChaCha8Rng| {
        let case_seed = rng.next_u64();
        cases.push(
            BenchmarkCase::realize(id, kind, words, n, case_seed, &alphabet, &exclude).unwrap(),
        );
    };
    for i in 0..2 {
        let w = pick(&mut rng).to_string();
        let n = rng.gen_range(1..=2);
        case(format!("prefix{i}"), TemplateKind::Prefix, vec![w], Some(n), &mut rng);
    }
    for i in 0..2 {
        let w = pick(&mut rng).to_string();
        let n = rng.gen_range(1..=2);
        case(format!("suffix{i}"), TemplateKind::Suffix, vec![w], Some(n), &mut rng);
    }
    for i in 0..2 {
        let (a, b) = pick_two(&mut rng);
        case(format!("appear{i}"), TemplateKind::Appearance, vec![a, b], None, &mut rng);
    }
    for i in 0..2 {
        let (a, b) = pick_two(&mut rng);
        let n = rng.gen_range(1..=2);
        case(format!("betweenn{i}"), TemplateKind::BetweenN, vec![a, b], Some(n), &mut rng);
    }
    for i in 0..2 {
        let (a, b) = pick_two(&mut rng);
        case(format!("between{i}"), TemplateKind::BetweenUnbounded, vec![a, b], None, &mut rng);
    }
    for (i, n) in [3usize, 4].into_iter().enumerate() {
        case(format!("wordlen{i}"), TemplateKind::WordLength, vec![], Some(n), &mut rng);
    }
    cases
}
