//! Regex abstract syntax and the parser for the supported dialect.
//!
//! Supported syntax: literals, `\`-escapes for metacharacters, `.` (full
//! alphabet), `[...]` classes with ranges, `(...)` grouping, `|`, `*`, `+`,
//! `?`, and bounded repetition `{m}` / `{m,n}`. Patterns describe whole
//! strings (anchored match), not search. Negated classes, backreferences,
//! lookaround and lazy quantifiers are not supported.

use crate::alphabet::Alphabet;
use crate::error::{Error, Result};

/// Largest accepted repetition bound; compilation has its own state cap, this
/// guard just keeps `{m,n}` expansion from allocating absurd ASTs.
const MAX_REPEAT: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegexAst {
    /// Matches only the empty string.
    Empty,
    Literal(char),
    /// Explicit character set; `.` parses to the full alphabet class.
    Class(Vec<char>),
    Concat(Vec<RegexAst>),
    Alt(Vec<RegexAst>),
    Star(Box<RegexAst>),
    Plus(Box<RegexAst>),
    Optional(Box<RegexAst>),
    Repeat {
        min: usize,
        max: usize,
        inner: Box<RegexAst>,
    },
    /// Explicit grouping node for programmatic construction; the parser
    /// resolves `(...)` purely as precedence and does not emit it.
    Group(Box<RegexAst>),
}

impl RegexAst {
    /// Whether the expression matches the empty string.
    pub fn is_nullable(&self) -> bool {
        match self {
            RegexAst::Empty => true,
            RegexAst::Literal(_) | RegexAst::Class(_) => false,
            RegexAst::Concat(parts) => parts.iter().all(|p| p.is_nullable()),
            RegexAst::Alt(parts) => parts.iter().any(|p| p.is_nullable()),
            RegexAst::Star(_) | RegexAst::Optional(_) => true,
            RegexAst::Plus(inner) => inner.is_nullable(),
            RegexAst::Repeat { min, inner, .. } => *min == 0 || inner.is_nullable(),
            RegexAst::Group(inner) => inner.is_nullable(),
        }
    }
}

/// Parse `pattern` over `alphabet` into an AST.
///
/// Every literal and class member must lie in the alphabet; violations are
/// reported as [`Error::CharOutsideAlphabet`], malformed syntax as
/// [`Error::RegexSyntax`] with a byte position.
pub fn parse_regex(pattern: &str, alphabet: &Alphabet) -> Result<RegexAst> {
    let mut parser = Parser {
        chars: pattern.char_indices().collect(),
        pos: 0,
        alphabet,
    };
    let ast = parser.alternation()?;
    if parser.pos < parser.chars.len() {
        return Err(parser.syntax_error("unexpected character"));
    }
    Ok(ast)
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    alphabet: &'a Alphabet,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn byte_pos(&self) -> usize {
        self.chars
            .get(self.pos)
            .map(|&(b, _)| b)
            .unwrap_or_else(|| self.chars.last().map(|&(b, c)| b + c.len_utf8()).unwrap_or(0))
    }

    fn syntax_error(&self, message: &str) -> Error {
        Error::RegexSyntax {
            position: self.byte_pos(),
            message: message.into(),
        }
    }

    fn check_alphabet(&self, c: char) -> Result<char> {
        if self.alphabet.contains(c) {
            Ok(c)
        } else {
            Err(Error::CharOutsideAlphabet(c))
        }
    }

    fn alternation(&mut self) -> Result<RegexAst> {
        let mut branches = vec![self.concat()?];
        while self.peek() == Some('|') {
            self.bump();
            branches.push(self.concat()?);
        }
        if branches.len() == 1 {
            Ok(branches.pop().unwrap())
        } else {
            Ok(RegexAst::Alt(branches))
        }
    }

    fn concat(&mut self) -> Result<RegexAst> {
        let mut parts = Vec::new();
        while let Some(c) = self.peek() {
            if c == '|' || c == ')' {
                break;
            }
            parts.push(self.repeat()?);
        }
        match parts.len() {
            0 => Ok(RegexAst::Empty),
            1 => Ok(parts.pop().unwrap()),
            _ => Ok(RegexAst::Concat(parts)),
        }
    }

    fn repeat(&mut self) -> Result<RegexAst> {
        let mut node = self.atom()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.bump();
                    node = RegexAst::Star(Box::new(node));
                }
                Some('+') => {
                    self.bump();
                    node = RegexAst::Plus(Box::new(node));
                }
                Some('?') => {
                    self.bump();
                    node = RegexAst::Optional(Box::new(node));
                }
                Some('{') => {
                    self.bump();
                    let (min, max) = self.repeat_bounds()?;
                    node = RegexAst::Repeat {
                        min,
                        max,
                        inner: Box::new(node),
                    };
                }
                _ => break,
            }
        }
        Ok(node)
    }

    fn repeat_bounds(&mut self) -> Result<(usize, usize)> {
        let min = self.number()?;
        let max = match self.peek() {
            Some(',') => {
                self.bump();
                if self.peek() == Some('}') {
                    return Err(self.syntax_error("unbounded repetition {m,} is not supported"));
                }
                self.number()?
            }
            _ => min,
        };
        if self.bump() != Some('}') {
            return Err(self.syntax_error("expected '}' in repetition"));
        }
        if min > max {
            return Err(self.syntax_error("repetition requires m <= n"));
        }
        if max > MAX_REPEAT {
            return Err(self.syntax_error("repetition bound too large"));
        }
        Ok((min, max))
    }

    fn number(&mut self) -> Result<usize> {
        let mut digits = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                digits.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if digits.is_empty() {
            return Err(self.syntax_error("expected a number"));
        }
        digits
            .parse()
            .map_err(|_| self.syntax_error("repetition bound too large"))
    }

    fn atom(&mut self) -> Result<RegexAst> {
        match self.peek() {
            None => Err(self.syntax_error("unexpected end of pattern")),
            Some('(') => {
                self.bump();
                let inner = self.alternation()?;
                if self.bump() != Some(')') {
                    return Err(self.syntax_error("expected ')'"));
                }
                Ok(inner)
            }
            Some('.') => {
                self.bump();
                Ok(RegexAst::Class(self.alphabet.chars().to_vec()))
            }
            Some('[') => {
                self.bump();
                self.class()
            }
            Some('\\') => {
                self.bump();
                match self.bump() {
                    Some(c) => Ok(RegexAst::Literal(self.check_alphabet(c)?)),
                    None => Err(self.syntax_error("dangling escape")),
                }
            }
            Some(c) if is_meta(c) => Err(self.syntax_error("unexpected character")),
            Some(c) => {
                self.bump();
                Ok(RegexAst::Literal(self.check_alphabet(c)?))
            }
        }
    }

    fn class(&mut self) -> Result<RegexAst> {
        if self.peek() == Some('^') {
            return Err(self.syntax_error("negated classes are not supported"));
        }
        let mut members = Vec::new();
        loop {
            let c = match self.bump() {
                None => return Err(self.syntax_error("unterminated character class")),
                Some(']') => break,
                Some('\\') => self
                    .bump()
                    .ok_or_else(|| self.syntax_error("dangling escape"))?,
                Some(c) => c,
            };
            // Range if a '-' follows and is not the closing position.
            if self.peek() == Some('-') && self.chars.get(self.pos + 1).map(|&(_, c)| c) != Some(']')
            {
                self.bump();
                let hi = match self.bump() {
                    None => return Err(self.syntax_error("unterminated character class")),
                    Some('\\') => self
                        .bump()
                        .ok_or_else(|| self.syntax_error("dangling escape"))?,
                    Some(h) => h,
                };
                if (c as u32) > (hi as u32) {
                    return Err(self.syntax_error("inverted range in character class"));
                }
                for code in (c as u32)..=(hi as u32) {
                    let m = char::from_u32(code).unwrap();
                    members.push(self.check_alphabet(m)?);
                }
            } else {
                members.push(self.check_alphabet(c)?);
            }
        }
        if members.is_empty() {
            return Err(self.syntax_error("empty character class"));
        }
        members.sort_unstable();
        members.dedup();
        Ok(RegexAst::Class(members))
    }
}

fn is_meta(c: char) -> bool {
    matches!(
        c,
        '.' | '[' | ']' | '(' | ')' | '{' | '}' | '|' | '*' | '+' | '?' | '\\'
    )
}
