//! Character-level deterministic finite automata.

use std::collections::{BTreeMap, BTreeSet};

use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::textio::{escape, expect_header, parse_field, unescape, Lines};

pub type StateId = usize;

const DFA_HEADER: &str = "dfa v1";

/// A DFA over a declared [`Alphabet`]. The transition map is partial: a
/// missing `(state, char)` entry means the string is rejected. States are
/// plain indices `0..state_count` and the compiler numbers them in BFS
/// discovery order, so equal inputs always produce byte-identical automata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    alphabet: Alphabet,
    /// Per-state map from alphabet char index to successor state.
    transitions: Vec<BTreeMap<usize, StateId>>,
    start: StateId,
    accepting: BTreeSet<StateId>,
}

impl Dfa {
    /// Build a DFA from explicit transition triples, validating determinism
    /// and index ranges.
    pub fn new(
        alphabet: Alphabet,
        state_count: usize,
        start: StateId,
        transitions: &[(StateId, char, StateId)],
        accepting: &[StateId],
    ) -> Result<Self> {
        if start >= state_count {
            return Err(Error::InvalidStateId(start));
        }
        let mut table: Vec<BTreeMap<usize, StateId>> = vec![BTreeMap::new(); state_count];
        for &(from, c, to) in transitions {
            if from >= state_count {
                return Err(Error::InvalidStateId(from));
            }
            if to >= state_count {
                return Err(Error::InvalidStateId(to));
            }
            let ci = alphabet
                .index_of(c)
                .ok_or(Error::CharOutsideAlphabet(c))?;
            if let Some(&prev) = table[from].get(&ci) {
                if prev != to {
                    return Err(Error::InvalidParameter(format!(
                        "nondeterministic transition from state {from} on {c:?}"
                    )));
                }
            }
            table[from].insert(ci, to);
        }
        let mut finals = BTreeSet::new();
        for &q in accepting {
            if q >= state_count {
                return Err(Error::InvalidStateId(q));
            }
            finals.insert(q);
        }
        Ok(Self {
            alphabet,
            transitions: table,
            start,
            accepting: finals,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn state_count(&self) -> usize {
        self.transitions.len()
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

    /// Successor of `q` on the alphabet char with index `char_idx`, if any.
    pub fn next(&self, q: StateId, char_idx: usize) -> Option<StateId> {
        self.transitions.get(q)?.get(&char_idx).copied()
    }

    /// Successor of `q` on character `c`; errors if `c` is not in the
    /// alphabet.
    pub fn step(&self, q: StateId, c: char) -> Result<Option<StateId>> {
        let ci = self
            .alphabet
            .index_of(c)
            .ok_or(Error::CharOutsideAlphabet(c))?;
        Ok(self.next(q, ci))
    }

    /// Whether the extended transition from the start state on `s` ends in an
    /// accepting state.
    pub fn accepts(&self, s: &str) -> Result<bool> {
        let mut q = self.start;
        for c in s.chars() {
            match self.step(q, c)? {
                Some(next) => q = next,
                None => {
                    // Still scan the rest so out-of-alphabet input is always
                    // reported, not masked by an early dead end.
                    self.alphabet.check_str(s)?;
                    return Ok(false);
                }
            }
        }
        Ok(self.is_accepting(q))
    }

    /// Transition triples in canonical `(state, char index)` order.
    pub fn transition_triples(&self) -> impl Iterator<Item = (StateId, char, StateId)> + '_ {
        self.transitions.iter().enumerate().flat_map(move |(q, row)| {
            row.iter()
                .map(move |(&ci, &to)| (q, self.alphabet.char_at(ci), to))
        })
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.iter().map(|row| row.len()).sum()
    }

    /// Serialize to the structured text format. Round-trips bit-exactly
    /// through [`Dfa::from_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(DFA_HEADER);
        out.push('\n');
        out.push_str(&format!("alphabet {}\n", escape(&self.alphabet.to_string())));
        out.push_str(&format!("states {}\n", self.state_count()));
        out.push_str(&format!("start {}\n", self.start));
        out.push_str("accepting");
        for q in &self.accepting {
            out.push_str(&format!(" {q}"));
        }
        out.push('\n');
        for (q, c, to) in self.transition_triples() {
            out.push_str(&format!("trans {q} {} {to}\n", escape(&c.to_string())));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        expect_header(&mut lines, DFA_HEADER)?;

        let fields = lines.tagged("alphabet")?;
        if fields.len() != 1 {
            return Err(lines.error("alphabet line takes one field"));
        }
        let alphabet = Alphabet::from_str(&unescape(fields[0])?)?;

        let fields = lines.tagged("states")?;
        if fields.len() != 1 {
            return Err(lines.error("states line takes one field"));
        }
        let state_count: usize = parse_field(&lines, fields[0], "state count")?;

        let fields = lines.tagged("start")?;
        if fields.len() != 1 {
            return Err(lines.error("start line takes one field"));
        }
        let start: usize = parse_field(&lines, fields[0], "start state")?;

        let fields = lines.tagged("accepting")?;
        let mut accepting = Vec::new();
        for f in fields.iter().filter(|f| !f.is_empty()) {
            accepting.push(parse_field(&lines, f, "accepting state")?);
        }

        let mut triples = Vec::new();
        while !lines.peek_done() {
            let fields = lines.tagged("trans")?;
            if fields.len() != 3 {
                return Err(lines.error("trans line takes three fields"));
            }
            let from: usize = parse_field(&lines, fields[0], "state")?;
            let c = unescape(fields[1])?;
            let mut chars = c.chars();
            let (c, rest) = (chars.next(), chars.next());
            if rest.is_some() || c.is_none() {
                return Err(lines.error("trans char field must be a single character"));
            }
            let to: usize = parse_field(&lines, fields[2], "state")?;
            triples.push((from, c.unwrap(), to));
        }

        Dfa::new(alphabet, state_count, start, &triples, &accepting)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The five-state cat/cut automaton used throughout the crate's tests.
    pub(crate) fn cat_cut_dfa() -> Dfa {
        let alphabet = Alphabet::from_str("acrtu").unwrap();
        Dfa::new(
            alphabet,
            5,
            0,
            &[(0, 'c', 1), (1, 'a', 2), (1, 'u', 3), (2, 't', 4), (3, 't', 4)],
            &[4],
        )
        .unwrap()
    }

    #[test]
    fn accepts_cat_and_cut_only() {
        let dfa = cat_cut_dfa();
        assert!(dfa.accepts("cat").unwrap());
        assert!(dfa.accepts("cut").unwrap());
        assert!(!dfa.accepts("car").unwrap());
        assert!(!dfa.accepts("ca").unwrap());
        assert!(!dfa.accepts("catt").unwrap());
        assert!(!dfa.accepts("").unwrap());
    }

    #[test]
    fn out_of_alphabet_input_is_an_error() {
        let dfa = cat_cut_dfa();
        assert!(matches!(
            dfa.accepts("cax"),
            Err(Error::CharOutsideAlphabet('x'))
        ));
        // Even when the walk dies before reaching the offending char.
        assert!(matches!(
            dfa.accepts("tx"),
            Err(Error::CharOutsideAlphabet('x'))
        ));
    }

    #[test]
    fn rejects_nondeterminism() {
        let alphabet = Alphabet::from_str("ab").unwrap();
        let r = Dfa::new(alphabet, 2, 0, &[(0, 'a', 0), (0, 'a', 1)], &[1]);
        assert!(r.is_err());
    }

    #[test]
    fn rejects_bad_indices() {
        let alphabet = Alphabet::from_str("ab").unwrap();
        assert!(Dfa::new(alphabet.clone(), 2, 5, &[], &[]).is_err());
        assert!(Dfa::new(alphabet.clone(), 2, 0, &[(0, 'a', 7)], &[]).is_err());
        assert!(Dfa::new(alphabet, 2, 0, &[], &[9]).is_err());
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let dfa = cat_cut_dfa();
        let text = dfa.to_text();
        let back = Dfa::from_text(&text).unwrap();
        assert_eq!(back, dfa);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn text_format_with_space_in_alphabet() {
        let alphabet = Alphabet::from_str("a b").unwrap();
        let dfa = Dfa::new(alphabet, 2, 0, &[(0, ' ', 1)], &[1]).unwrap();
        let text = dfa.to_text();
        let back = Dfa::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert!(back.accepts(" ").unwrap());
    }

    #[test]
    fn from_text_rejects_wrong_version() {
        let text = cat_cut_dfa().to_text().replace("dfa v1", "dfa v2");
        assert!(matches!(
            Dfa::from_text(&text),
            Err(Error::FormatVersion { .. })
        ));
    }
}
