//! Natural-language regex benchmark templates and satisfaction evaluation.
//!
//! Sentences are space-separated words; a word is a maximal run of
//! letter-class characters. Each template realizes a positional or
//! co-occurrence constraint as an anchored regex over that shape. For
//! generation the raw regex is wrapped as `.*(raw).*` so the fixed-length
//! decode can carry padding and filler around the constrained span, and
//! satisfaction is membership of the full decoded string in that padded
//! language, checked on the character-level DFA.

use std::time::Instant;

use rayon::prelude::*;

use crate::aligned::{align, AlignOptions};
use crate::alphabet::Alphabet;
use crate::compile::{compile_pattern, minimize, CompileOptions};
use crate::diffusion::{sample, DiffusionModel, GuidanceConfig};
use crate::error::{Error, Result};
use crate::textio::{expect_header, parse_field, Lines};

const SUITE_HEADER: &str = "suite v1";
const REPORT_HEADER: &str = "report v1";
pub const CSV_COLUMNS: &str = "case_id,kind,gamma,samples,satisfied,rate,pass_at_k,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateKind {
    Prefix,
    Suffix,
    Appearance,
    BetweenN,
    BetweenUnbounded,
    WordLength,
}

impl TemplateKind {
    pub fn name(&self) -> &'static str {
        match self {
            TemplateKind::Prefix => "prefix",
            TemplateKind::Suffix => "suffix",
            TemplateKind::Appearance => "appearance",
            TemplateKind::BetweenN => "between_n",
            TemplateKind::BetweenUnbounded => "between",
            TemplateKind::WordLength => "word_length",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "prefix" => TemplateKind::Prefix,
            "suffix" => TemplateKind::Suffix,
            "appearance" => TemplateKind::Appearance,
            "between_n" => TemplateKind::BetweenN,
            "between" => TemplateKind::BetweenUnbounded,
            "word_length" => TemplateKind::WordLength,
            _ => return None,
        })
    }
}

/// One benchmark constraint: template parameters plus the realized raw and
/// padded regexes.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkCase {
    pub id: String,
    pub kind: TemplateKind,
    pub words: Vec<String>,
    pub n: Option<usize>,
    pub seed: u64,
    pub raw_regex: String,
    pub padded_regex: String,
}

/// Characters allowed inside a word: the alphabet minus the separator space
/// and minus any excluded characters (typically the pad character).
pub fn letter_class(alphabet: &Alphabet, exclude: &str) -> String {
    alphabet
        .chars()
        .iter()
        .filter(|&&c| c != ' ' && !exclude.contains(c))
        .collect()
}

fn escape_class(chars: &str) -> String {
    let mut out = String::new();
    for c in chars.chars() {
        if matches!(c, ']' | '\\' | '-' | '^') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

fn escape_literal(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if matches!(
            c,
            '.' | '[' | ']' | '(' | ')' | '{' | '}' | '|' | '*' | '+' | '?' | '\\'
        ) {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

fn check_word(word: &str, letters: &str) -> Result<()> {
    if word.is_empty() {
        return Err(Error::InvalidParameter("empty template word".into()));
    }
    for c in word.chars() {
        if !letters.contains(c) {
            return Err(Error::InvalidParameter(format!(
                "word {word:?} uses {c:?} outside the letter class"
            )));
        }
    }
    Ok(())
}

fn word_atom(letters: &str) -> String {
    format!("[{}]+", escape_class(letters))
}

/// `word` is exactly the n-th word from the start, 1 <= n <= 5.
pub fn gen_prefix(word: &str, n: usize, letters: &str) -> Result<String> {
    if !(1..=5).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "prefix position {n} outside 1..=5"
        )));
    }
    check_word(word, letters)?;
    let w = word_atom(letters);
    Ok(format!("({w} ){{{}}}{}( {w})*", n - 1, escape_literal(word)))
}

/// `word` is exactly the n-th word from the end, 1 <= n <= 3.
pub fn gen_suffix(word: &str, n: usize, letters: &str) -> Result<String> {
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "suffix position {n} outside 1..=3"
        )));
    }
    check_word(word, letters)?;
    let w = word_atom(letters);
    Ok(format!("({w} )*{}( {w}){{{}}}", escape_literal(word), n - 1))
}

/// Both words appear somewhere, in either order.
pub fn gen_appearance(word1: &str, word2: &str, letters: &str) -> Result<String> {
    let a = gen_between_unbounded(word1, word2, letters)?;
    let b = gen_between_unbounded(word2, word1, letters)?;
    Ok(format!("({a})|({b})"))
}

/// `word1` before `word2` with exactly `n` words in between, 1 <= n <= 3.
pub fn gen_between_n(word1: &str, word2: &str, n: usize, letters: &str) -> Result<String> {
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "between distance {n} outside 1..=3"
        )));
    }
    check_word(word1, letters)?;
    check_word(word2, letters)?;
    let w = word_atom(letters);
    Ok(format!(
        "({w} )*{}( {w}){{{n}}} {}( {w})*",
        escape_literal(word1),
        escape_literal(word2)
    ))
}

/// `word1` before `word2`, any number of words in between.
pub fn gen_between_unbounded(word1: &str, word2: &str, letters: &str) -> Result<String> {
    check_word(word1, letters)?;
    check_word(word2, letters)?;
    let w = word_atom(letters);
    Ok(format!(
        "({w} )*{}( {w})* {}( {w})*",
        escape_literal(word1),
        escape_literal(word2)
    ))
}

/// Some word has exactly `n` characters, 1 <= n <= 10.
pub fn gen_word_length(n: usize, letters: &str) -> Result<String> {
    if !(1..=10).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "word length {n} outside 1..=10"
        )));
    }
    let w = word_atom(letters);
    let cls = escape_class(letters);
    Ok(format!("({w} )*[{cls}]{{{n}}}( {w})*"))
}

/// Wrap a raw constraint for fixed-length generation: wildcards on both
/// sides, grouped to preserve precedence.
pub fn pad(raw: &str) -> String {
    format!(".*({raw}).*")
}

impl BenchmarkCase {
    /// Realize a template instance over `alphabet`, keeping `exclude`
    /// (typically the pad character) out of the word class.
    pub fn realize(
        id: impl Into<String>,
        kind: TemplateKind,
        words: Vec<String>,
        n: Option<usize>,
        seed: u64,
        alphabet: &Alphabet,
        exclude: &str,
    ) -> Result<Self> {
        let letters = letter_class(alphabet, exclude);
        let need_words = match kind {
            TemplateKind::Prefix | TemplateKind::Suffix => 1,
            TemplateKind::Appearance | TemplateKind::BetweenN | TemplateKind::BetweenUnbounded => 2,
            TemplateKind::WordLength => 0,
        };
        if words.len() != need_words {
            return Err(Error::InvalidParameter(format!(
                "{} takes {need_words} words, got {}",
                kind.name(),
                words.len()
            )));
        }
        let raw = match kind {
            TemplateKind::Prefix => gen_prefix(&words[0], required(n)?, &letters)?,
            TemplateKind::Suffix => gen_suffix(&words[0], required(n)?, &letters)?,
            TemplateKind::Appearance => gen_appearance(&words[0], &words[1], &letters)?,
            TemplateKind::BetweenN => gen_between_n(&words[0], &words[1], required(n)?, &letters)?,
            TemplateKind::BetweenUnbounded => {
                gen_between_unbounded(&words[0], &words[1], &letters)?
            }
            TemplateKind::WordLength => gen_word_length(required(n)?, &letters)?,
        };
        let padded_regex = pad(&raw);
        Ok(Self {
            id: id.into(),
            kind,
            words,
            n,
            seed,
            raw_regex: raw,
            padded_regex,
        })
    }
}

fn required(n: Option<usize>) -> Result<usize> {
    n.ok_or_else(|| Error::InvalidParameter("template requires a numeric parameter".into()))
}

/// Hand-written JSON-shaped constraints used for automaton-level tests: a
/// flat object with fixed keys, an enum value, and a quoted free string.
pub fn json_fixture_regexes() -> Vec<(&'static str, &'static str, &'static str)> {
    vec![
        (
            "json_flat_object",
            "\\{\"id\": [0-9]+, \"tag\": \"[a-z]+\"\\}",
            "abcdefghijklmnopqrstuvwxyz0123456789\"{}:, ",
        ),
        (
            "json_enum_value",
            "\\{\"color\": (\"red\"|\"green\"|\"blue\")\\}",
            "abcdefghijklmnopqrstuvwxyz\"{}:, ",
        ),
        (
            "json_quoted_string",
            "\\{\"name\": \"[a-z ]*\"\\}",
            "abcdefghijklmnopqrstuvwxyz\"{}:, ",
        ),
    ]
}

/// Serialize cases to the suite file format (parameters only; regexes are
/// re-derived on load).
pub fn suite_to_text(cases: &[BenchmarkCase]) -> String {
    let mut out = String::new();
    out.push_str(SUITE_HEADER);
    out.push('\n');
    for c in cases {
        out.push_str(&format!("case {} {}", c.id, c.kind.name()));
        for w in &c.words {
            out.push_str(&format!(" {w}"));
        }
        if let Some(n) = c.n {
            out.push_str(&format!(" {n}"));
        }
        out.push_str(&format!(" {}\n", c.seed));
    }
    out
}

pub fn suite_from_text(
    text: &str,
    alphabet: &Alphabet,
    exclude: &str,
) -> Result<Vec<BenchmarkCase>> {
    let mut lines = Lines::new(text);
    expect_header(&mut lines, SUITE_HEADER)?;
    let mut cases = Vec::new();
    while !lines.peek_done() {
        let fields = lines.tagged("case")?;
        if fields.len() < 3 {
            return Err(lines.error("case line too short"));
        }
        let id = fields[0];
        let kind = TemplateKind::from_name(fields[1])
            .ok_or_else(|| lines.error(format!("unknown template kind {:?}", fields[1])))?;
        let rest = &fields[2..];
        let (words, n, seed): (Vec<String>, Option<usize>, u64) = match kind {
            TemplateKind::Prefix | TemplateKind::Suffix => {
                if rest.len() != 3 {
                    return Err(lines.error("expected: word n seed"));
                }
                (
                    vec![rest[0].to_string()],
                    Some(parse_field(&lines, rest[1], "n")?),
                    parse_field(&lines, rest[2], "seed")?,
                )
            }
            TemplateKind::Appearance | TemplateKind::BetweenUnbounded => {
                if rest.len() != 3 {
                    return Err(lines.error("expected: word1 word2 seed"));
                }
                (
                    vec![rest[0].to_string(), rest[1].to_string()],
                    None,
                    parse_field(&lines, rest[2], "seed")?,
                )
            }
            TemplateKind::BetweenN => {
                if rest.len() != 4 {
                    return Err(lines.error("expected: word1 word2 n seed"));
                }
                (
                    vec![rest[0].to_string(), rest[1].to_string()],
                    Some(parse_field(&lines, rest[2], "n")?),
                    parse_field(&lines, rest[3], "seed")?,
                )
            }
            TemplateKind::WordLength => {
                if rest.len() != 2 {
                    return Err(lines.error("expected: n seed"));
                }
                (
                    Vec::new(),
                    Some(parse_field(&lines, rest[0], "n")?),
                    parse_field(&lines, rest[1], "seed")?,
                )
            }
        };
        cases.push(BenchmarkCase::realize(
            id, kind, words, n, seed, alphabet, exclude,
        )?);
    }
    Ok(cases)
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub samples_per_case: usize,
    /// The k of pass@k, over the first k samples by index.
    pub pass_at: usize,
    /// Reverse-process steps per sample.
    pub steps: usize,
    pub seed: u64,
    pub lambda_smooth: f64,
    pub clip_norm: f64,
    pub compile: CompileOptions,
    pub align: AlignOptions,
    /// When false, wall_ms is reported as zero so reports are byte-identical
    /// across runs.
    pub record_timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub case_id: String,
    pub kind: &'static str,
    pub gamma: f64,
    pub samples: usize,
    pub satisfied: usize,
    pub rate: f64,
    pub pass_at_k: bool,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub seed: u64,
    pub steps: usize,
    pub samples_per_case: usize,
    pub pass_at: usize,
    pub gammas: Vec<f64>,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    /// Mean satisfaction rate over all cases at one guidance scale.
    pub fn mean_satisfaction(&self, gamma: f64) -> f64 {
        let rows: Vec<&EvalRow> = self.rows.iter().filter(|r| r.gamma == gamma).collect();
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().map(|r| r.rate).sum::<f64>() / rows.len() as f64
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(REPORT_HEADER);
        out.push('\n');
        out.push_str(&format!("seed {}\n", self.seed));
        out.push_str(&format!("steps {}\n", self.steps));
        out.push_str(&format!("samples_per_case {}\n", self.samples_per_case));
        out.push_str(&format!("k {}\n", self.pass_at));
        out.push_str("gammas");
        for g in &self.gammas {
            out.push_str(&format!(" {g}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "row {} {} {} {} {} {} {} {}\n",
                r.case_id,
                r.kind,
                r.gamma,
                r.samples,
                r.satisfied,
                r.rate,
                if r.pass_at_k { 1 } else { 0 },
                r.wall_ms
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        expect_header(&mut lines, REPORT_HEADER)?;
        let field = lines.tagged("seed")?[0];
        let seed = parse_field(&lines, field, "seed")?;
        let field = lines.tagged("steps")?[0];
        let steps = parse_field(&lines, field, "steps")?;
        let field = lines.tagged("samples_per_case")?[0];
        let samples_per_case = parse_field(&lines, field, "samples")?;
        let field = lines.tagged("k")?[0];
        let pass_at = parse_field(&lines, field, "k")?;
        let mut gammas = Vec::new();
        for f in lines.tagged("gammas")? {
            gammas.push(parse_field(&lines, f, "gamma")?);
        }
        let mut rows = Vec::new();
        while !lines.peek_done() {
            let f = lines.tagged("row")?;
            if f.len() != 8 {
                return Err(lines.error("row takes eight fields"));
            }
            let kind = TemplateKind::from_name(f[1])
                .ok_or_else(|| lines.error("unknown kind"))?
                .name();
            rows.push(EvalRow {
                case_id: f[0].to_string(),
                kind,
                gamma: parse_field(&lines, f[2], "gamma")?,
                samples: parse_field(&lines, f[3], "samples")?,
                satisfied: parse_field(&lines, f[4], "satisfied")?,
                rate: parse_field(&lines, f[5], "rate")?,
                pass_at_k: f[6] == "1",
                wall_ms: parse_field(&lines, f[7], "wall_ms")?,
            });
        }
        Ok(Self {
            seed,
            steps,
            samples_per_case,
            pass_at,
            gammas,
            rows,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_COLUMNS);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.case_id,
                r.kind,
                r.gamma,
                r.samples,
                r.satisfied,
                r.rate,
                if r.pass_at_k { 1 } else { 0 },
                r.wall_ms
            ));
        }
        out
    }
}

/// Run every case at every guidance scale: compile and align the padded
/// constraint, draw seeded samples (guided for gamma > 0), and score padded
/// language membership of each full decoded string on the char DFA.
/// Per-sample seeds are `seed + global_sample_index`, so the report is a pure
/// function of its inputs (timing aside).
pub fn evaluate(
    model: &DiffusionModel,
    cases: &[BenchmarkCase],
    gammas: &[f64],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if opts.samples_per_case < opts.pass_at {
        return Err(Error::InvalidParameter(
            "samples_per_case must be at least k".into(),
        ));
    }
    let alphabet = model.vocab().alphabet();
    let mut rows = Vec::new();
    for (case_idx, case) in cases.iter().enumerate() {
        let dfa = minimize(&compile_pattern(
            &case.padded_regex,
            alphabet,
            &opts.compile,
        )?);
        let automaton = align(&dfa, model.vocab(), &opts.align)?;
        for (gamma_idx, &gamma) in gammas.iter().enumerate() {
            let cfg = GuidanceConfig {
                gamma,
                lambda_smooth: opts.lambda_smooth,
                clip_norm: opts.clip_norm,
            };
            let base = opts.seed.wrapping_add(
                ((case_idx * gammas.len() + gamma_idx) * opts.samples_per_case) as u64,
            );
            let started = Instant::now();
            let satisfied_flags: Vec<bool> = (0..opts.samples_per_case)
                .into_par_iter()
                .map(|i| {
                    let out = sample(
                        model,
                        Some(&automaton),
                        &cfg,
                        opts.steps,
                        base.wrapping_add(i as u64),
                    )?;
                    dfa.accepts(&out.text)
                })
                .collect::<Result<_>>()?;
            let wall_ms = if opts.record_timing {
                started.elapsed().as_millis() as u64
            } else {
                0
            };
            let satisfied = satisfied_flags.iter().filter(|&&s| s).count();
            let pass_at_k = satisfied_flags.iter().take(opts.pass_at).any(|&s| s);
            rows.push(EvalRow {
                case_id: case.id.clone(),
                kind: case.kind.name(),
                gamma,
                samples: opts.samples_per_case,
                satisfied,
                rate: satisfied as f64 / opts.samples_per_case as f64,
                pass_at_k,
                wall_ms,
            });
        }
    }
    Ok(EvalReport {
        seed: opts.seed,
        steps: opts.steps,
        samples_per_case: opts.samples_per_case,
        pass_at: opts.pass_at,
        gammas: gammas.to_vec(),
        rows,
    })
}
