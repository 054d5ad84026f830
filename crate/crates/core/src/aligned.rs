//! Vocabulary alignment: lifting a character-level DFA to a token-level
//! automaton.
//!
//! A regex constrains *strings*, but a model emits *tokens*, and one string
//! usually has several tokenizations. `align` adds a transition `(q, tok, q')`
//! whenever the token's character path leads from `q` to `q'` in the source
//! DFA, so the lifted automaton accepts every tokenization of every string in
//! the language and nothing else. Character transitions survive only when the
//! single-character string is itself a vocabulary token.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::dfa::{Dfa, StateId};
use crate::error::{Error, Result};
use crate::textio::{escape, expect_header, parse_field, unescape, Lines};
use crate::vocab::{TokenId, Vocabulary};

const ALIGNED_HEADER: &str = "aligned v1";

/// Transitions between one state pair, carrying every token that labels the
/// pair. This grouping is exactly the index set summed when a step's
/// transition weight is computed, so the scoring pass never regroups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionGroup {
    pub from: StateId,
    pub to: StateId,
    pub tokens: Vec<TokenId>,
}

/// Token-level automaton produced by [`align`]. States are those of the
/// source DFA; immutable after construction and safe to share across
/// threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedAutomaton {
    state_count: usize,
    start: StateId,
    accepting: BTreeSet<StateId>,
    groups: Vec<TransitionGroup>,
    step: HashMap<(StateId, TokenId), StateId>,
    vocab: Vocabulary,
}

#[derive(Debug, Clone, Copy)]
pub struct AlignOptions {
    /// Alignment aborts once more than this many token-level transitions
    /// exist.
    pub transition_cap: usize,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            transition_cap: 10_000_000,
        }
    }
}

/// Split a token into its character sequence.
pub fn charify(token: &str) -> Vec<char> {
    token.chars().collect()
}

/// Follow `chars` from state `q`; `None` if any step is undefined.
pub fn traverse(chars: &[char], q: StateId, dfa: &Dfa) -> Option<StateId> {
    let mut cur = q;
    for &c in chars {
        let ci = dfa.alphabet().index_of(c)?;
        cur = dfa.next(cur, ci)?;
    }
    Some(cur)
}

/// Lift `dfa` to the token level over `vocab`. Tokens with no valid character
/// path from a given state contribute nothing there; tokens with no valid
/// path anywhere are skipped entirely.
pub fn align(dfa: &Dfa, vocab: &Vocabulary, opts: &AlignOptions) -> Result<AlignedAutomaton> {
    if vocab.alphabet() != dfa.alphabet() {
        return Err(Error::InvalidVocabulary(
            "vocabulary and DFA alphabets differ".into(),
        ));
    }
    let mut triples: Vec<(StateId, TokenId, StateId)> = Vec::new();
    for (tok_id, tok) in vocab.tokens().iter().enumerate() {
        let chars = charify(tok);
        for q in 0..dfa.state_count() {
            if let Some(q2) = traverse(&chars, q, dfa) {
                if triples.len() >= opts.transition_cap {
                    return Err(Error::TransitionCapExceeded {
                        cap: opts.transition_cap,
                    });
                }
                triples.push((q, tok_id, q2));
            }
        }
    }
    AlignedAutomaton::from_parts(
        dfa.state_count(),
        dfa.start(),
        dfa.accepting().collect(),
        &triples,
        vocab.clone(),
    )
}

impl AlignedAutomaton {
    /// Build from explicit transition triples, validating ranges and
    /// per-token determinism.
    pub fn from_parts(
        state_count: usize,
        start: StateId,
        accepting: Vec<StateId>,
        triples: &[(StateId, TokenId, StateId)],
        vocab: Vocabulary,
    ) -> Result<Self> {
        if start >= state_count {
            return Err(Error::InvalidStateId(start));
        }
        let mut finals = BTreeSet::new();
        for q in accepting {
            if q >= state_count {
                return Err(Error::InvalidStateId(q));
            }
            finals.insert(q);
        }
        let mut step = HashMap::with_capacity(triples.len());
        let mut grouped: BTreeMap<(StateId, StateId), Vec<TokenId>> = BTreeMap::new();
        for &(from, tok, to) in triples {
            if from >= state_count {
                return Err(Error::InvalidStateId(from));
            }
            if to >= state_count {
                return Err(Error::InvalidStateId(to));
            }
            if tok >= vocab.len() {
                return Err(Error::InvalidTokenId(tok));
            }
            if let Some(&prev) = step.get(&(from, tok)) {
                if prev != to {
                    return Err(Error::InvalidParameter(format!(
                        "nondeterministic token transition from state {from} on token {tok}"
                    )));
                }
                continue;
            }
            step.insert((from, tok), to);
            grouped.entry((from, to)).or_default().push(tok);
        }
        let groups = grouped
            .into_iter()
            .map(|((from, to), mut tokens)| {
                tokens.sort_unstable();
                TransitionGroup { from, to, tokens }
            })
            .collect();
        Ok(Self {
            state_count,
            start,
            accepting: finals,
            groups,
            step,
            vocab,
        })
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn accepting(&self) -> impl Iterator<Item = StateId> + '_ {
        self.accepting.iter().copied()
    }

    pub fn is_accepting(&self, q: StateId) -> bool {
        self.accepting.contains(&q)
    }

    /// Transition groups sorted by `(from, to)`.
    pub fn groups(&self) -> &[TransitionGroup] {
        &self.groups
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Number of token-level transitions.
    pub fn transition_count(&self) -> usize {
        self.groups.iter().map(|g| g.tokens.len()).sum()
    }

    /// Successor of `q` on token `tok`, if defined.
    pub fn step(&self, q: StateId, tok: TokenId) -> Option<StateId> {
        self.step.get(&(q, tok)).copied()
    }

    /// Whether the token path from the start state ends in an accepting
    /// state.
    pub fn accepts_tokens(&self, tokens: &[TokenId]) -> Result<bool> {
        for &t in tokens {
            if t >= self.vocab.len() {
                return Err(Error::InvalidTokenId(t));
            }
        }
        let mut q = self.start;
        for &t in tokens {
            match self.step(q, t) {
                Some(next) => q = next,
                None => return Ok(false),
            }
        }
        Ok(self.is_accepting(q))
    }

    /// Serialize to the structured text format (self-contained: includes the
    /// vocabulary). Round-trips bit-exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(ALIGNED_HEADER);
        out.push('\n');
        out.push_str(&format!(
            "alphabet {}\n",
            escape(&self.vocab.alphabet().to_string())
        ));
        out.push_str(&format!("states {}\n", self.state_count));
        out.push_str(&format!("start {}\n", self.start));
        out.push_str("accepting");
        for q in &self.accepting {
            out.push_str(&format!(" {q}"));
        }
        out.push('\n');
        match self.vocab.pad() {
            Some(p) => out.push_str(&format!("pad {p}\n")),
            None => out.push_str("pad none\n"),
        }
        out.push_str(&format!("vocab {}\n", self.vocab.len()));
        for tok in self.vocab.tokens() {
            out.push_str(&format!("tok {}\n", escape(tok)));
        }
        for g in &self.groups {
            out.push_str(&format!("group {} {}", g.from, g.to));
            for t in &g.tokens {
                out.push_str(&format!(" {t}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        expect_header(&mut lines, ALIGNED_HEADER)?;

        let fields = lines.tagged("alphabet")?;
        if fields.len() != 1 {
            return Err(lines.error("alphabet line takes one field"));
        }
        let alphabet = crate::alphabet::Alphabet::from_str(&unescape(fields[0])?)?;

        let fields = lines.tagged("states")?;
        let state_count: usize = parse_field(&lines, fields[0], "state count")?;

        let fields = lines.tagged("start")?;
        let start: usize = parse_field(&lines, fields[0], "start state")?;

        let fields = lines.tagged("accepting")?;
        let mut accepting = Vec::new();
        for f in fields.iter().filter(|f| !f.is_empty()) {
            accepting.push(parse_field(&lines, f, "accepting state")?);
        }

        let fields = lines.tagged("pad")?;
        if fields.len() != 1 {
            return Err(lines.error("pad line takes one field"));
        }
        let pad: Option<usize> = match fields[0] {
            "none" => None,
            f => Some(parse_field(&lines, f, "pad id")?),
        };

        let fields = lines.tagged("vocab")?;
        let vocab_len: usize = parse_field(&lines, fields[0], "vocab size")?;
        let mut tokens = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            let fields = lines.tagged("tok")?;
            if fields.len() != 1 {
                return Err(lines.error("tok line takes one field"));
            }
            tokens.push(unescape(fields[0])?);
        }
        let vocab = Vocabulary::new(alphabet, tokens, pad)?;

        let mut triples = Vec::new();
        while !lines.peek_done() {
            let fields = lines.tagged("group")?;
            if fields.len() < 3 {
                return Err(lines.error("group line takes at least three fields"));
            }
            let from: usize = parse_field(&lines, fields[0], "state")?;
            let to: usize = parse_field(&lines, fields[1], "state")?;
            for f in &fields[2..] {
                let tok: usize = parse_field(&lines, f, "token id")?;
                triples.push((from, tok, to));
            }
        }
        Self::from_parts(state_count, start, accepting, &triples, vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;

    fn cat_cut() -> (Dfa, Vocabulary) {
        let alphabet = Alphabet::from_str("acrtu").unwrap();
        let dfa = Dfa::new(
            alphabet.clone(),
            5,
            0,
            &[(0, 'c', 1), (1, 'a', 2), (1, 'u', 3), (2, 't', 4), (3, 't', 4)],
            &[4],
        )
        .unwrap();
        let vocab =
            Vocabulary::new(alphabet, ["a", "c", "r", "t", "u", "ca", "at", "rt"], None).unwrap();
        (dfa, vocab)
    }

    #[test]
    fn charify_splits_token() {
        assert_eq!(charify("cat"), vec!['c', 'a', 't']);
        assert_eq!(charify("a"), vec!['a']);
        assert_eq!(charify("ca"), vec!['c', 'a']);
    }

    #[test]
    fn traverse_follows_paths() {
        let (dfa, _) = cat_cut();
        assert_eq!(traverse(&['c', 'a'], 0, &dfa), Some(2));
        assert_eq!(traverse(&['a', 't'], 1, &dfa), Some(4));
        for q in 0..5 {
            assert_eq!(traverse(&['r', 't'], q, &dfa), None);
        }
        assert_eq!(traverse(&[], 3, &dfa), Some(3));
    }

    #[test]
    fn align_adds_multichar_transitions() {
        let (dfa, vocab) = cat_cut();
        let a = align(&dfa, &vocab, &AlignOptions::default()).unwrap();
        let ca = vocab.id_of("ca").unwrap();
        let at = vocab.id_of("at").unwrap();
        let rt = vocab.id_of("rt").unwrap();
        assert_eq!(a.step(0, ca), Some(2));
        assert_eq!(a.step(1, at), Some(4));
        // Single-char transitions present wherever the char is a token.
        assert_eq!(a.step(0, vocab.id_of("c").unwrap()), Some(1));
        assert_eq!(a.step(2, vocab.id_of("t").unwrap()), Some(4));
        // "rt" has no character path anywhere.
        for q in 0..5 {
            assert_eq!(a.step(q, rt), None);
        }
    }

    #[test]
    fn aligned_transitions_match_source_paths() {
        let (dfa, vocab) = cat_cut();
        let a = align(&dfa, &vocab, &AlignOptions::default()).unwrap();
        for g in a.groups() {
            for &tok in &g.tokens {
                let chars = charify(vocab.token(tok).unwrap());
                assert_eq!(traverse(&chars, g.from, &dfa), Some(g.to));
            }
        }
    }

    #[test]
    fn accepts_all_tokenizations() {
        let (dfa, vocab) = cat_cut();
        let a = align(&dfa, &vocab, &AlignOptions::default()).unwrap();
        let id = |s: &str| vocab.id_of(s).unwrap();
        assert!(a.accepts_tokens(&[id("ca"), id("t")]).unwrap());
        assert!(a.accepts_tokens(&[id("c"), id("at")]).unwrap());
        assert!(a.accepts_tokens(&[id("c"), id("a"), id("t")]).unwrap());
        assert!(a.accepts_tokens(&[id("c"), id("u"), id("t")]).unwrap());
        assert!(!a.accepts_tokens(&[id("t"), id("a"), id("c")]).unwrap());
        assert!(!a.accepts_tokens(&[id("ca")]).unwrap());
        assert!(!a.accepts_tokens(&[]).unwrap());
        assert!(a.accepts_tokens(&[99]).is_err());
    }

    #[test]
    fn single_char_vocab_is_identity_on_transitions() {
        let (dfa, _) = cat_cut();
        let vocab = Vocabulary::new(
            dfa.alphabet().clone(),
            dfa.alphabet().chars().iter().map(|c| c.to_string()),
            None,
        )
        .unwrap();
        let a = align(&dfa, &vocab, &AlignOptions::default()).unwrap();
        assert_eq!(a.transition_count(), dfa.transition_count());
        let mut dfa_triples: Vec<(usize, usize, usize)> = dfa
            .transition_triples()
            .map(|(q, c, q2)| (q, vocab.id_of(&c.to_string()).unwrap(), q2))
            .collect();
        let mut aligned_triples: Vec<(usize, usize, usize)> = a
            .groups()
            .iter()
            .flat_map(|g| g.tokens.iter().map(move |&t| (g.from, t, g.to)))
            .collect();
        dfa_triples.sort_unstable();
        aligned_triples.sort_unstable();
        assert_eq!(dfa_triples, aligned_triples);
    }

    #[test]
    fn useless_vocab_yields_empty_transition_set() {
        let alphabet = Alphabet::from_str("abx").unwrap();
        let dfa = Dfa::new(alphabet.clone(), 2, 0, &[(0, 'a', 1)], &[1]).unwrap();
        let vocab = Vocabulary::new(alphabet, ["x"], None).unwrap();
        let a = align(&dfa, &vocab, &AlignOptions::default()).unwrap();
        assert_eq!(a.transition_count(), 0);
        assert!(!a.accepts_tokens(&[0]).unwrap());
    }

    #[test]
    fn transition_cap_is_enforced() {
        let (dfa, vocab) = cat_cut();
        let tight = AlignOptions { transition_cap: 3 };
        assert!(matches!(
            align(&dfa, &vocab, &tight),
            Err(Error::TransitionCapExceeded { cap: 3 })
        ));
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let (dfa, vocab) = cat_cut();
        let a = align(&dfa, &vocab, &AlignOptions::default()).unwrap();
        let text = a.to_text();
        let back = AlignedAutomaton::from_text(&text).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn from_parts_rejects_nondeterminism() {
        let alphabet = Alphabet::from_str("ab").unwrap();
        let vocab = Vocabulary::new(alphabet, ["a"], None).unwrap();
        let r = AlignedAutomaton::from_parts(2, 0, vec![1], &[(0, 0, 0), (0, 0, 1)], vocab);
        assert!(r.is_err());
    }
}
