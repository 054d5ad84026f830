//! Escaping and line-parsing helpers shared by the structured text formats.
//!
//! Every file format in this crate is line-oriented with whitespace-separated
//! fields, so spaces inside payloads (tokens, alphabets, decoded strings) are
//! escaped as `\s`. Floats are written with Rust's shortest round-trip
//! `Display` and therefore re-parse to the identical bit pattern.

use crate::error::{Error, Result};

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            ' ' => out.push_str("\\s"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            _ => out.push(c),
        }
    }
    out
}

pub fn unescape(s: &str) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('s') => out.push(' '),
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "bad escape sequence \\{}",
                    other.map(String::from).unwrap_or_default()
                )))
            }
        }
    }
    Ok(out)
}

/// Cursor over the lines of a structured text document. Keeps a 1-based line
/// number for error reporting and skips nothing: formats are strict.
pub struct Lines<'a> {
    iter: std::str::Lines<'a>,
    line: usize,
}

impl<'a> Lines<'a> {
    pub fn new(text: &'a str) -> Self {
        Self {
            iter: text.lines(),
            line: 0,
        }
    }

    pub fn next_line(&mut self) -> Result<&'a str> {
        self.line += 1;
        self.iter
            .next()
            .ok_or_else(|| self.error("unexpected end of file"))
    }

    pub fn peek_done(&mut self) -> bool {
        self.iter.clone().next().is_none()
    }

    pub fn line_number(&self) -> usize {
        self.line
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    /// Next line split into fields, with the first field required to equal
    /// `tag`.
    pub fn tagged(&mut self, tag: &str) -> Result<Vec<&'a str>> {
        let line = self.next_line()?;
        let mut fields: Vec<&str> = line.split(' ').collect();
        if fields.first() != Some(&tag) {
            return Err(self.error(format!("expected line tagged {tag:?}, got {line:?}")));
        }
        fields.remove(0);
        Ok(fields)
    }
}

pub fn parse_field<T: std::str::FromStr>(lines: &Lines<'_>, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| lines.error(format!("invalid {what}: {field:?}")))
}

/// Checks a `<name> v1`-style header line.
pub fn expect_header(lines: &mut Lines<'_>, expected: &str) -> Result<()> {
    let line = lines.next_line()?;
    if line != expected {
        return Err(Error::FormatVersion {
            expected: expected.to_string(),
            found: line.to_string(),
        });
    }
    Ok(())
}
