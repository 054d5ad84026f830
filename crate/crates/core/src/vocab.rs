//! Token vocabularies.

use std::collections::HashMap;

use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::textio::{escape, unescape};

pub type TokenId = usize;

/// Ordered list of tokens over an [`Alphabet`]; a token's id is its index.
/// Tokens may span several characters and need not cover every alphabet
/// symbol. A pad token can be designated for fixed-length sequence work.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    alphabet: Alphabet,
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    pad: Option<TokenId>,
}

impl Vocabulary {
    pub fn new<S: Into<String>>(
        alphabet: Alphabet,
        tokens: impl IntoIterator<Item = S>,
        pad: Option<TokenId>,
    ) -> Result<Self> {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(Error::InvalidVocabulary("no tokens".into()));
        }
        let mut index = HashMap::new();
        for (id, tok) in tokens.iter().enumerate() {
            if tok.is_empty() {
                return Err(Error::InvalidVocabulary("empty token".into()));
            }
            alphabet.check_str(tok)?;
            if index.insert(tok.clone(), id).is_some() {
                return Err(Error::InvalidVocabulary(format!("duplicate token {tok:?}")));
            }
        }
        if let Some(p) = pad {
            if p >= tokens.len() {
                return Err(Error::InvalidTokenId(p));
            }
        }
        Ok(Self {
            alphabet,
            tokens,
            index,
            pad,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: TokenId) -> Result<&str> {
        self.tokens
            .get(id)
            .map(String::as_str)
            .ok_or(Error::InvalidTokenId(id))
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id_of(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn pad(&self) -> Option<TokenId> {
        self.pad
    }

    pub fn with_pad(mut self, pad: TokenId) -> Result<Self> {
        if pad >= self.tokens.len() {
            return Err(Error::InvalidTokenId(pad));
        }
        self.pad = Some(pad);
        Ok(self)
    }

    /// One escaped token per line, in id order. The pad designation is not
    /// part of the file; callers set it when loading.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for tok in &self.tokens {
            out.push_str(&escape(tok));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, alphabet: Alphabet) -> Result<Self> {
        let tokens: Vec<String> = text
            .lines()
            .map(unescape)
            .collect::<Result<_>>()?;
        Self::new(alphabet, tokens, None)
    }

    /// Deterministic greedy longest-match tokenization of `s`. Errors if no
    /// token matches at some position.
    pub fn tokenize_greedy(&self, s: &str) -> Result<Vec<TokenId>> {
        let mut out = Vec::new();
        let mut rest = s;
        while !rest.is_empty() {
            let mut best: Option<(usize, TokenId)> = None;
            for (id, tok) in self.tokens.iter().enumerate() {
                if rest.starts_with(tok.as_str()) {
                    let better = match best {
                        Some((len, _)) => tok.len() > len,
                        None => true,
                    };
                    if better {
                        best = Some((tok.len(), id));
                    }
                }
            }
            match best {
                Some((len, id)) => {
                    out.push(id);
                    rest = &rest[len..];
                }
                None => {
                    return Err(Error::InvalidVocabulary(format!(
                        "cannot tokenize {s:?}: no token matches at {rest:?}"
                    )))
                }
            }
        }
        Ok(out)
    }

    /// Concatenate the tokens of `ids`.
    pub fn detokenize(&self, ids: &[TokenId]) -> Result<String> {
        let mut out = String::new();
        for &id in ids {
            out.push_str(self.token(id)?);
        }
        Ok(out)
    }

    /// Extend `ids` with pad tokens up to `len`.
    pub fn pad_to(&self, mut ids: Vec<TokenId>, len: usize) -> Result<Vec<TokenId>> {
        let pad = self
            .pad
            .ok_or_else(|| Error::InvalidVocabulary("no pad token designated".into()))?;
        if ids.len() > len {
            return Err(Error::InvalidParameter(format!(
                "sequence of {} tokens does not fit length {len}",
                ids.len()
            )));
        }
        ids.resize(len, pad);
        Ok(ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        let alphabet = Alphabet::from_str("acrtu").unwrap();
        Vocabulary::new(alphabet, ["a", "c", "r", "t", "u", "ca", "at"], None).unwrap()
    }

    #[test]
    fn ids_follow_declaration_order() {
        let v = vocab();
        assert_eq!(v.id_of("ca"), Some(5));
        assert_eq!(v.token(6).unwrap(), "at");
        assert_eq!(v.len(), 7);
    }

    #[test]
    fn rejects_duplicates_and_foreign_chars() {
        let alphabet = Alphabet::from_str("ab").unwrap();
        assert!(Vocabulary::new(alphabet.clone(), ["a", "a"], None).is_err());
        assert!(Vocabulary::new(alphabet.clone(), ["ax"], None).is_err());
        assert!(Vocabulary::new(alphabet.clone(), [""], None).is_err());
        assert!(Vocabulary::new(alphabet, ["a"], Some(3)).is_err());
    }

    #[test]
    fn text_round_trip_with_spaces() {
        let alphabet = Alphabet::from_str("cat s").unwrap();
        let v = Vocabulary::new(alphabet.clone(), ["cat", " ", "sat", "a c"], None).unwrap();
        let text = v.to_text();
        let back = Vocabulary::from_text(&text, alphabet).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn greedy_tokenization_prefers_longest() {
        let v = vocab();
        // "cat" -> ca + t, not c + at (greedy longest at position 0).
        assert_eq!(v.tokenize_greedy("cat").unwrap(), vec![5, 3]);
        assert_eq!(v.detokenize(&[5, 3]).unwrap(), "cat");
        assert!(v.tokenize_greedy("cax").is_err());
    }

    #[test]
    fn padding() {
        let alphabet = Alphabet::from_str("ab#").unwrap();
        let v = Vocabulary::new(alphabet, ["a", "b", "#"], Some(2)).unwrap();
        assert_eq!(v.pad_to(vec![0, 1], 4).unwrap(), vec![0, 1, 2, 2]);
        assert!(v.pad_to(vec![0, 1, 0, 1, 0], 4).is_err());
    }
}
