//! The character alphabet a run is declared over.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Ordered set of printable-ASCII characters. Automata, vocabularies and
/// benchmark templates are all defined against one declared `Alphabet`;
/// character indices follow declaration order, which also fixes the canonical
/// state numbering produced by the compiler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Alphabet {
    pub fn new<I: IntoIterator<Item = char>>(chars: I) -> Result<Self> {
        let chars: Vec<char> = chars.into_iter().collect();
        if chars.is_empty() {
            return Err(Error::InvalidAlphabet("alphabet is empty".into()));
        }
        let mut index = HashMap::new();
        for (i, &c) in chars.iter().enumerate() {
            if !(' '..='~').contains(&c) {
                return Err(Error::InvalidAlphabet(format!(
                    "character {c:?} is not printable ASCII"
                )));
            }
            if index.insert(c, i).is_some() {
                return Err(Error::InvalidAlphabet(format!("duplicate character {c:?}")));
            }
        }
        Ok(Self { chars, index })
    }

    /// Alphabet from the characters of `s`, in order.
    pub fn from_str(s: &str) -> Result<Self> {
        Self::new(s.chars())
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn contains(&self, c: char) -> bool {
        self.index.contains_key(&c)
    }

    /// Index of `c` in declaration order.
    pub fn index_of(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn char_at(&self, i: usize) -> char {
        self.chars[i]
    }

    /// Errors unless every character of `s` is in the alphabet.
    pub fn check_str(&self, s: &str) -> Result<()> {
        for c in s.chars() {
            if !self.contains(c) {
                return Err(Error::CharOutsideAlphabet(c));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.chars {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}
