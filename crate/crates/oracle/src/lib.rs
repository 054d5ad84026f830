//! Reference implementations used only for verification: definitional
//! brute-force expectations, a regex AST interpreter, exhaustive language
//! enumeration, central finite differences, and seeded random instance
//! generators. Nothing here is optimized, on purpose — these are the
//! independent answers the fast paths are checked against.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::{Rng, RngCore};

use dfaguide::aligned::AlignedAutomaton;
use dfaguide::alphabet::Alphabet;
use dfaguide::dfa::Dfa;
use dfaguide::regex::RegexAst;
use dfaguide::unigram::UnigramMatrix;
use dfaguide::vocab::Vocabulary;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("enumeration budget exceeded: {0} sequences")]
    BudgetExceeded(u128),
    #[error("non-finite evaluation during finite differences")]
    NonFinite,
    #[error(transparent)]
    Core(#[from] dfaguide::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Copy)]
pub struct EnumerationBudget {
    pub max_sequences: u128,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        Self {
            max_sequences: 10_000_000,
        }
    }
}

/// The expectation computed straight from its definition: sum over every
/// token sequence of length `l` of its probability times acceptance.
pub fn brute_force_expected(
    a: &AlignedAutomaton,
    u: &UnigramMatrix,
    budget: &EnumerationBudget,
) -> Result<f64> {
    let v = u.vocab_len();
    let l = u.seq_len();
    let total = (v as u128).pow(l as u32);
    if total > budget.max_sequences {
        return Err(Error::BudgetExceeded(total));
    }
    let mut seq = vec![0usize; l];
    let mut sum = 0.0;
    loop {
        let mut prob = 1.0;
        for (k, &tok) in seq.iter().enumerate() {
            prob *= u.get(k, tok);
        }
        if prob > 0.0 && a.accepts_tokens(&seq)? {
            sum += prob;
        }
        // Odometer increment in token-id-lexicographic order.
        let mut pos = l;
        loop {
            if pos == 0 {
                return Ok(sum);
            }
            pos -= 1;
            seq[pos] += 1;
            if seq[pos] < v {
                break;
            }
            seq[pos] = 0;
        }
    }
}

/// Second, independent formulation of the same quantity: a recursive
/// memoized sum over `(position, state)`.
pub fn brute_force_expected_memo(a: &AlignedAutomaton, u: &UnigramMatrix) -> f64 {
    fn go(
        a: &AlignedAutomaton,
        u: &UnigramMatrix,
        pos: usize,
        state: usize,
        memo: &mut Vec<Option<f64>>,
        n: usize,
    ) -> f64 {
        let key = pos * n + state;
        if let Some(v) = memo[key] {
            return v;
        }
        let value = if pos == u.seq_len() {
            if a.is_accepting(state) {
                1.0
            } else {
                0.0
            }
        } else {
            let mut acc = 0.0;
            for tok in 0..u.vocab_len() {
                if let Some(next) = a.step(state, tok) {
                    let p = u.get(pos, tok);
                    if p > 0.0 {
                        acc += p * go(a, u, pos + 1, next, memo, n);
                    }
                }
            }
            acc
        };
        memo[key] = Some(value);
        value
    }
    let n = a.state_count();
    let mut memo = vec![None; (u.seq_len() + 1) * n];
    go(a, u, 0, a.start(), &mut memo, n)
}

/// The expectation as a raw multilinear form over arbitrary (not necessarily
/// normalized) nonnegative rows, evaluated by the memoized recursion. This is
/// the scalar function finite differences are applied to when checking
/// gradients: perturbing one entry of a distribution breaks the row-sum
/// invariant, but the multilinear extension is still well defined and its
/// partial derivatives coincide with `dE/du` at any stochastic point.
pub fn multilinear_expected(a: &AlignedAutomaton, rows: &[Vec<f64>]) -> f64 {
    fn go(
        a: &AlignedAutomaton,
        rows: &[Vec<f64>],
        pos: usize,
        state: usize,
        memo: &mut Vec<Option<f64>>,
        n: usize,
    ) -> f64 {
        let key = pos * n + state;
        if let Some(v) = memo[key] {
            return v;
        }
        let value = if pos == rows.len() {
            if a.is_accepting(state) {
                1.0
            } else {
                0.0
            }
        } else {
            let mut acc = 0.0;
            for (tok, &p) in rows[pos].iter().enumerate() {
                if p != 0.0 {
                    if let Some(next) = a.step(state, tok) {
                        acc += p * go(a, rows, pos + 1, next, memo, n);
                    }
                }
            }
            acc
        };
        memo[key] = Some(value);
        value
    }
    let n = a.state_count();
    let mut memo = vec![None; (rows.len() + 1) * n];
    go(a, rows, 0, a.start(), &mut memo, n)
}

/// Central finite differences of a scalar function of a matrix.
pub fn finite_difference<F>(f: F, point: &Array2<f64>, h: f64) -> Result<Array2<f64>>
where
    F: Fn(&Array2<f64>) -> Result<f64>,
{
    let mut grad = Array2::zeros(point.raw_dim());
    for idx in 0..point.len() {
        let (rows, cols) = point.dim();
        let (r, c) = (idx / cols, idx % cols);
        debug_assert!(r < rows);
        let mut plus = point.clone();
        plus[[r, c]] += h;
        let mut minus = point.clone();
        minus[[r, c]] -= h;
        let fp = f(&plus)?;
        let fm = f(&minus)?;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite);
        }
        grad[[r, c]] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Largest entrywise relative error between two matrices, with small entries
/// compared against `floor` rather than each other.
pub fn max_relative_error(a: &Array2<f64>, b: &Array2<f64>, floor: f64) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Every accepted string of length at most `max_len`, in lexicographic order
/// of the alphabet's declaration order.
pub fn enumerate_language(
    dfa: &Dfa,
    max_len: usize,
    budget: &EnumerationBudget,
) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut prefix = String::new();
    let mut visited: u128 = 0;
    fn go(
        dfa: &Dfa,
        q: usize,
        depth: usize,
        max_len: usize,
        prefix: &mut String,
        out: &mut Vec<String>,
        visited: &mut u128,
        budget: &EnumerationBudget,
    ) -> Result<()> {
        *visited += 1;
        if *visited > budget.max_sequences {
            return Err(Error::BudgetExceeded(*visited));
        }
        if dfa.is_accepting(q) {
            out.push(prefix.clone());
        }
        if depth == max_len {
            return Ok(());
        }
        for ci in 0..dfa.alphabet().len() {
            if let Some(next) = dfa.next(q, ci) {
                let c = dfa.alphabet().char_at(ci);
                prefix.push(c);
                go(dfa, next, depth + 1, max_len, prefix, out, visited, budget)?;
                prefix.pop();
            }
        }
        Ok(())
    }
    go(
        dfa,
        dfa.start(),
        0,
        max_len,
        &mut prefix,
        &mut out,
        &mut visited,
        budget,
    )?;
    Ok(out)
}

/// Direct AST interpretation with position-set semantics (no backtracking,
/// no compilation): the independent matcher the compiler is checked against.
pub fn match_ast(ast: &RegexAst, s: &str, alphabet: &Alphabet) -> bool {
    let chars: Vec<char> = s.chars().collect();
    let end: BTreeSet<usize> = eval(ast, &BTreeSet::from([0]), &chars, alphabet);
    end.contains(&chars.len())
}

fn eval(
    node: &RegexAst,
    starts: &BTreeSet<usize>,
    chars: &[char],
    alphabet: &Alphabet,
) -> BTreeSet<usize> {
    match node {
        RegexAst::Empty => starts.clone(),
        RegexAst::Literal(c) => starts
            .iter()
            .filter(|&&p| p < chars.len() && chars[p] == *c)
            .map(|&p| p + 1)
            .collect(),
        RegexAst::Class(members) => starts
            .iter()
            .filter(|&&p| p < chars.len() && members.contains(&chars[p]))
            .map(|&p| p + 1)
            .collect(),
        RegexAst::Concat(parts) => {
            let mut cur = starts.clone();
            for part in parts {
                cur = eval(part, &cur, chars, alphabet);
                if cur.is_empty() {
                    break;
                }
            }
            cur
        }
        RegexAst::Alt(branches) => {
            let mut out = BTreeSet::new();
            for b in branches {
                out.extend(eval(b, starts, chars, alphabet));
            }
            out
        }
        RegexAst::Star(inner) => closure(inner, starts, chars, alphabet),
        RegexAst::Plus(inner) => {
            let once = eval(inner, starts, chars, alphabet);
            closure(inner, &once, chars, alphabet)
        }
        RegexAst::Optional(inner) => {
            let mut out = starts.clone();
            out.extend(eval(inner, starts, chars, alphabet));
            out
        }
        RegexAst::Repeat { min, max, inner } => {
            let mut cur = starts.clone();
            for _ in 0..*min {
                cur = eval(inner, &cur, chars, alphabet);
                if cur.is_empty() {
                    return cur;
                }
            }
            let mut out = cur.clone();
            for _ in *min..*max {
                cur = eval(inner, &cur, chars, alphabet);
                if cur.is_empty() {
                    break;
                }
                out.extend(cur.iter().copied());
            }
            out
        }
        RegexAst::Group(inner) => eval(inner, starts, chars, alphabet),
    }
}

/// Reflexive-transitive closure of one `inner` application.
fn closure(
    inner: &RegexAst,
    starts: &BTreeSet<usize>,
    chars: &[char],
    alphabet: &Alphabet,
) -> BTreeSet<usize> {
    let mut reached = starts.clone();
    let mut frontier = starts.clone();
    loop {
        let step = eval(inner, &frontier, chars, alphabet);
        let fresh: BTreeSet<usize> = step.difference(&reached).copied().collect();
        if fresh.is_empty() {
            return reached;
        }
        reached.extend(fresh.iter().copied());
        frontier = fresh;
    }
}

// ---------------------------------------------------------------------------
// Seeded random instances for the equivalence suites.
// ---------------------------------------------------------------------------

/// Random partial DFA over `alphabet` with at most `max_states` states.
pub fn random_dfa(rng: &mut impl Rng, alphabet: &Alphabet, max_states: usize) -> Dfa {
    let n = rng.gen_range(1..=max_states);
    let mut triples = Vec::new();
    for q in 0..n {
        for ci in 0..alphabet.len() {
            if rng.gen_bool(0.6) {
                triples.push((q, alphabet.char_at(ci), rng.gen_range(0..n)));
            }
        }
    }
    let accepting: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
    Dfa::new(alphabet.clone(), n, 0, &triples, &accepting).unwrap()
}

/// Random vocabulary of distinct tokens (lengths 1..=`max_token_len`).
pub fn random_vocab(
    rng: &mut impl Rng,
    alphabet: &Alphabet,
    max_tokens: usize,
    max_token_len: usize,
) -> Vocabulary {
    let count = rng.gen_range(1..=max_tokens);
    let mut tokens: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut guard = 0;
    while tokens.len() < count && guard < 1000 {
        guard += 1;
        let len = rng.gen_range(1..=max_token_len);
        let tok: String = (0..len)
            .map(|_| alphabet.char_at(rng.gen_range(0..alphabet.len())))
            .collect();
        if seen.insert(tok.clone()) {
            tokens.push(tok);
        }
    }
    Vocabulary::new(alphabet.clone(), tokens, None).unwrap()
}

/// Random row-stochastic unigram matrix (Dirichlet(1) rows).
pub fn random_unigram(rng: &mut impl Rng, seq_len: usize, vocab_len: usize) -> UnigramMatrix {
    let mut rows = Vec::with_capacity(seq_len);
    for _ in 0..seq_len {
        let mut row: Vec<f64> = (0..vocab_len)
            .map(|_| -(rng.gen_range(0.0f64..1.0).max(1e-12)).ln())
            .collect();
        let sum: f64 = row.iter().sum();
        for p in &mut row {
            *p /= sum;
        }
        rows.push(row);
    }
    UnigramMatrix::from_rows(&rows).unwrap()
}

/// Random regex AST of bounded depth over `alphabet`.
pub fn random_ast(rng: &mut impl Rng, alphabet: &Alphabet, depth: usize) -> RegexAst {
    let leaf = |rng: &mut dyn RngCore| {
        let c = alphabet.char_at((rng.next_u32() as usize) % alphabet.len());
        if rng.next_u32() % 4 == 0 {
            let extra = alphabet.char_at((rng.next_u32() as usize) % alphabet.len());
            let mut members = vec![c, extra];
            members.sort_unstable();
            members.dedup();
            RegexAst::Class(members)
        } else {
            RegexAst::Literal(c)
        }
    };
    if depth == 0 {
        return leaf(rng);
    }
    match rng.gen_range(0..10) {
        0 | 1 => leaf(rng),
        2 | 3 => {
            let parts = (0..rng.gen_range(2..=3))
                .map(|_| random_ast(rng, alphabet, depth - 1))
                .collect();
            RegexAst::Concat(parts)
        }
        4 | 5 => {
            let branches = (0..rng.gen_range(2..=3))
                .map(|_| random_ast(rng, alphabet, depth - 1))
                .collect();
            RegexAst::Alt(branches)
        }
        6 => RegexAst::Star(Box::new(random_ast(rng, alphabet, depth - 1))),
        7 => RegexAst::Plus(Box::new(random_ast(rng, alphabet, depth - 1))),
        8 => RegexAst::Optional(Box::new(random_ast(rng, alphabet, depth - 1))),
        _ => {
            let min = rng.gen_range(0..=2);
            let max = rng.gen_range(min..=3);
            RegexAst::Repeat {
                min,
                max,
                inner: Box::new(random_ast(rng, alphabet, depth - 1)),
            }
        }
    }
}

/// All strings over `alphabet` with length at most `max_len`, lexicographic.
pub fn all_strings(alphabet: &Alphabet, max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for &c in alphabet.chars() {
                let mut t = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// All token-id sequences of length at most `max_len`.
pub fn all_token_sequences(vocab_len: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for t in 0..vocab_len {
                let mut u = s.clone();
                u.push(t);
                next.push(u);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}
