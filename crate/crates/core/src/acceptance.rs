//! Expected acceptance probability of a unigram matrix under a token
//! automaton, with its exact gradient.
//!
//! The expectation is a chain of sparse matrix products: `p_0 M_1 ... M_l`
//! restricted to accepting states, where `M_k[q][q']` sums the step-`k`
//! probabilities of every token labelling `(q, q')`. The naive product
//! underflows long before the sequence lengths this crate targets, so the
//! forward and backward state vectors are renormalized at every step and the
//! log of each normalizer is accumulated; probabilities are reconstructed by
//! combining exponents in log space. Against that representation the gradient
//! is the usual forward-backward factorization
//! `dE/du[k][tok] = sum over (q, tok, q') of alpha_k[q] * beta_{k+1}[q']`,
//! which exists because `E` is multilinear in the unigram rows.

use ndarray::Array2;

use crate::aligned::AlignedAutomaton;
use crate::error::{Error, Result};
use crate::unigram::UnigramMatrix;

/// Divisor floor for `grad E / E`; below this the expectation is treated as
/// zero and callers get the gradient of the smoothed surrogate instead.
pub const EXPECTATION_FLOOR: f64 = 1e-30;

/// Default mixing weight toward the uniform distribution when computing
/// guidance gradients.
pub const DEFAULT_SMOOTHING: f64 = 1e-6;

/// Normalized forward state vectors and their accumulated log scales.
/// `states[k]` is the renormalized distribution over automaton states after
/// `k` positions; the true (unscaled) vector is `states[k] * exp(log_scales[k])`.
/// If the mass dies at some step the vector is exactly zero from then on and
/// the scale stops accumulating.
#[derive(Debug, Clone)]
pub struct ForwardState {
    pub states: Vec<Vec<f64>>,
    pub log_scales: Vec<f64>,
}

/// Result of an expectation computation. `log_expected` is authoritative
/// (`-inf` when the expectation is exactly zero); `expected` is its
/// exponential and may underflow to zero for long sequences.
#[derive(Debug, Clone)]
pub struct AcceptanceResult {
    pub log_expected: f64,
    pub expected: f64,
    /// `dE/du[k][tok]`, present when the gradient was requested.
    pub gradient: Option<Array2<f64>>,
}

impl AcceptanceResult {
    /// `grad E / max(E, floor)`, the gradient of `log E` in linear space.
    /// [`log_grad_wrt_unigram`] computes the same quantity with smoothing and
    /// with exponents combined in log space; prefer it for guidance.
    pub fn log_gradient(&self) -> Option<Array2<f64>> {
        let denom = self.expected.max(EXPECTATION_FLOOR);
        self.gradient.as_ref().map(|g| g.mapv(|x| x / denom))
    }
}

fn check_dims(a: &AlignedAutomaton, u: &UnigramMatrix) -> Result<()> {
    if u.vocab_len() != a.vocab().len() {
        return Err(Error::DimensionMismatch {
            what: "unigram vocabulary",
            expected: a.vocab().len(),
            actual: u.vocab_len(),
        });
    }
    Ok(())
}

/// `M_k[q][q']` for 0-based position `k`: the summed probability of every
/// token labelling the `(q, q')` transition group.
pub fn transition_weight(
    a: &AlignedAutomaton,
    u: &UnigramMatrix,
    position: usize,
    from: usize,
    to: usize,
) -> f64 {
    match a
        .groups()
        .binary_search_by_key(&(from, to), |g| (g.from, g.to))
    {
        Ok(i) => a.groups()[i]
            .tokens
            .iter()
            .map(|&t| u.get(position, t))
            .sum(),
        Err(_) => 0.0,
    }
}

/// Scaled forward recursion over all positions.
pub fn forward(a: &AlignedAutomaton, u: &UnigramMatrix) -> Result<ForwardState> {
    check_dims(a, u)?;
    let n = a.state_count();
    let l = u.seq_len();
    let mut states = Vec::with_capacity(l + 1);
    let mut log_scales = Vec::with_capacity(l + 1);
    let mut cur = vec![0.0; n];
    cur[a.start()] = 1.0;
    states.push(cur);
    log_scales.push(0.0);
    for k in 0..l {
        let prev = &states[k];
        let mut next = vec![0.0; n];
        for g in a.groups() {
            let p = prev[g.from];
            if p == 0.0 {
                continue;
            }
            let w: f64 = g.tokens.iter().map(|&t| u.get(k, t)).sum();
            next[g.to] += p * w;
        }
        let mass: f64 = next.iter().sum();
        let mut scale = log_scales[k];
        if mass > 0.0 {
            for x in &mut next {
                *x /= mass;
            }
            scale += mass.ln();
        }
        states.push(next);
        log_scales.push(scale);
    }
    Ok(ForwardState { states, log_scales })
}

/// Backward counterpart: `states[k]` is the renormalized vector of acceptance
/// weights over the remaining positions `k..l`, scaled by `exp(log_scales[k])`.
struct BackwardState {
    states: Vec<Vec<f64>>,
    log_scales: Vec<f64>,
}

fn backward(a: &AlignedAutomaton, u: &UnigramMatrix) -> BackwardState {
    let n = a.state_count();
    let l = u.seq_len();
    let mut states = vec![Vec::new(); l + 1];
    let mut log_scales = vec![0.0; l + 1];

    let mut last = vec![0.0; n];
    for q in a.accepting() {
        last[q] = 1.0;
    }
    let mass: f64 = last.iter().sum();
    if mass > 0.0 {
        for x in &mut last {
            *x /= mass;
        }
        log_scales[l] = mass.ln();
    }
    states[l] = last;

    for k in (0..l).rev() {
        let mut cur = vec![0.0; n];
        for g in a.groups() {
            let b = states[k + 1][g.to];
            if b == 0.0 {
                continue;
            }
            let w: f64 = g.tokens.iter().map(|&t| u.get(k, t)).sum();
            cur[g.from] += w * b;
        }
        let mass: f64 = cur.iter().sum();
        let mut scale = log_scales[k + 1];
        if mass > 0.0 {
            for x in &mut cur {
                *x /= mass;
            }
            scale += mass.ln();
        }
        states[k] = cur;
        log_scales[k] = scale;
    }
    BackwardState { states, log_scales }
}

fn result_from_forward(a: &AlignedAutomaton, fwd: &ForwardState) -> AcceptanceResult {
    let last = fwd.states.last().unwrap();
    let accept_mass: f64 = a.accepting().map(|q| last[q]).sum();
    let log_expected = if accept_mass > 0.0 {
        fwd.log_scales.last().unwrap() + accept_mass.ln()
    } else {
        f64::NEG_INFINITY
    };
    let expected = log_expected.exp();
    assert!(
        expected <= 1.0 + 1e-9,
        "expected probability {expected} exceeds 1"
    );
    AcceptanceResult {
        log_expected,
        expected: expected.min(1.0),
        gradient: None,
    }
}

/// Expected probability that a sequence drawn from `u` is accepted by `a`.
pub fn expected_probability(a: &AlignedAutomaton, u: &UnigramMatrix) -> Result<AcceptanceResult> {
    let fwd = forward(a, u)?;
    Ok(result_from_forward(a, &fwd))
}

fn assemble_gradient(
    a: &AlignedAutomaton,
    u: &UnigramMatrix,
    fwd: &ForwardState,
    bwd: &BackwardState,
    log_denominator: f64,
) -> Array2<f64> {
    let l = u.seq_len();
    let mut grad = Array2::zeros((l, u.vocab_len()));
    for k in 0..l {
        let log_factor = fwd.log_scales[k] + bwd.log_scales[k + 1] - log_denominator;
        let alpha = &fwd.states[k];
        let beta = &bwd.states[k + 1];
        for g in a.groups() {
            let f = alpha[g.from];
            if f == 0.0 {
                continue;
            }
            let b = beta[g.to];
            if b == 0.0 {
                continue;
            }
            // Combine all exponents in log space; the true product is a
            // bounded probability-ratio even when the factors are extreme.
            let val = (log_factor + f.ln() + b.ln()).exp();
            for &t in &g.tokens {
                grad[[k, t]] += val;
            }
        }
    }
    grad
}

/// Expected probability together with the exact gradient `dE/du`.
pub fn expected_probability_with_grad(
    a: &AlignedAutomaton,
    u: &UnigramMatrix,
) -> Result<AcceptanceResult> {
    let fwd = forward(a, u)?;
    let bwd = backward(a, u);
    let mut result = result_from_forward(a, &fwd);
    result.gradient = Some(assemble_gradient(a, u, &fwd, &bwd, 0.0));
    Ok(result)
}

/// Gradient of `log E` with respect to the unigram entries, the quantity the
/// guided sampler consumes. Rows are first mixed with the uniform
/// distribution at `lambda` so the field stays finite off-language; when even
/// the smoothed expectation is below [`EXPECTATION_FLOOR`] the division is
/// floored there.
pub fn log_grad_wrt_unigram(
    a: &AlignedAutomaton,
    u: &UnigramMatrix,
    lambda: f64,
) -> Result<Array2<f64>> {
    let smoothed = u.smoothed(lambda);
    let fwd = forward(a, &smoothed)?;
    let bwd = backward(a, &smoothed);
    let result = result_from_forward(a, &fwd);
    let log_denominator = result.log_expected.max(EXPECTATION_FLOOR.ln());
    Ok(assemble_gradient(a, &smoothed, &fwd, &bwd, log_denominator))
}
