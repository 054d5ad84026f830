//! The oracles are themselves checked before anything is checked against
//! them: two independent formulations of the brute-force expectation must
//! agree, and finite differences must be exact on functions with known
//! gradients.

mod common;

use dfaguide::aligned::{align, AlignOptions};
use dfaguide::alphabet::Alphabet;
use dfaguide::compile::{compile_pattern, CompileOptions};
use dfaguide::unigram::UnigramMatrix;
use dfaguide::vocab::Vocabulary;
use dfaguide_oracle::{
    brute_force_expected, brute_force_expected_memo, enumerate_language, finite_difference,
    EnumerationBudget,
};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn figure_instance_brute_force_is_0_28() {
    let (a, u) = common::figure_instance();
    let e = brute_force_expected(&a, &u, &EnumerationBudget::default()).unwrap();
    assert!((e - 0.28).abs() < 1e-12, "got {e}");
}

#[test]
fn unit_mass_on_accepted_and_rejected_sequences() {
    let (a, _) = common::figure_instance();
    // All mass on c, a, t.
    let accepted = UnigramMatrix::from_rows(&[
        vec![0.0, 1.0, 0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0, 0.0],
    ])
    .unwrap();
    let e = brute_force_expected(&a, &accepted, &EnumerationBudget::default()).unwrap();
    assert_eq!(e, 1.0);
    // All mass on t, a, c.
    let rejected = UnigramMatrix::from_rows(&[
        vec![0.0, 0.0, 0.0, 1.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0, 0.0],
    ])
    .unwrap();
    let e = brute_force_expected(&a, &rejected, &EnumerationBudget::default()).unwrap();
    assert_eq!(e, 0.0);
}

#[test]
fn enumeration_and_memoized_formulations_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let (a, u) = common::random_instance(&mut rng);
        let enumerated = brute_force_expected(&a, &u, &EnumerationBudget::default()).unwrap();
        let memoized = brute_force_expected_memo(&a, &u);
        assert!(
            (enumerated - memoized).abs() <= 1e-12,
            "{enumerated} vs {memoized}"
        );
    }
}

#[test]
fn oracle_is_pure() {
    let (a, u) = common::figure_instance();
    let e1 = brute_force_expected(&a, &u, &EnumerationBudget::default()).unwrap();
    let e2 = brute_force_expected(&a, &u, &EnumerationBudget::default()).unwrap();
    assert_eq!(e1, e2);
}

#[test]
fn budget_is_enforced() {
    let (a, u) = common::figure_instance();
    let tight = EnumerationBudget { max_sequences: 10 };
    assert!(brute_force_expected(&a, &u, &tight).is_err());
}

#[test]
fn finite_differences_exact_on_linear_functions() {
    let coeffs = Array2::from_shape_fn((2, 3), |(r, c)| (r * 3 + c) as f64 - 2.5);
    let f = |x: &Array2<f64>| Ok((x * &coeffs).sum());
    let point = Array2::from_elem((2, 3), 0.4);
    for h in [1e-3, 1e-5, 1e-7] {
        let g = finite_difference(f, &point, h).unwrap();
        for (a, b) in g.iter().zip(coeffs.iter()) {
            assert!((a - b).abs() < 1e-6, "h={h}: {a} vs {b}");
        }
    }
}

#[test]
fn finite_differences_on_quadratics_are_second_order() {
    // f(x) = sum x^2, gradient 2x; central differences are exact up to
    // floating-point noise because the third derivative vanishes.
    let f = |x: &Array2<f64>| Ok(x.iter().map(|v| v * v).sum());
    let point = Array2::from_shape_fn((2, 2), |(r, c)| (r + c) as f64 * 0.3 + 0.1);
    let g = finite_difference(f, &point, 1e-5).unwrap();
    for (a, b) in g.iter().zip(point.iter()) {
        assert!((a - 2.0 * b).abs() < 1e-9);
    }
}

#[test]
fn finite_differences_reject_non_finite() {
    let f = |_: &Array2<f64>| Ok(f64::NAN);
    let point = Array2::zeros((1, 1));
    assert!(finite_difference(f, &point, 1e-5).is_err());
}

#[test]
fn language_enumeration_examples() {
    let alphabet = Alphabet::from_str("acrtu").unwrap();
    let dfa = compile_pattern("c(a|u)t", &alphabet, &CompileOptions::default()).unwrap();
    let words = enumerate_language(&dfa, 3, &EnumerationBudget::default()).unwrap();
    assert_eq!(words, vec!["cat".to_string(), "cut".to_string()]);

    let alphabet = Alphabet::from_str("a").unwrap();
    let dfa = compile_pattern(".*", &alphabet, &CompileOptions::default()).unwrap();
    let words = enumerate_language(&dfa, 2, &EnumerationBudget::default()).unwrap();
    assert_eq!(words, vec!["".to_string(), "a".to_string(), "aa".to_string()]);

    let alphabet = Alphabet::from_str("ab").unwrap();
    let empty = dfaguide::Dfa::new(alphabet, 1, 0, &[], &[]).unwrap();
    assert!(enumerate_language(&empty, 4, &EnumerationBudget::default())
        .unwrap()
        .is_empty());
}

#[test]
fn enumeration_respects_budget() {
    let alphabet = Alphabet::from_str("ab").unwrap();
    let dfa = compile_pattern(".*", &alphabet, &CompileOptions::default()).unwrap();
    let tight = EnumerationBudget { max_sequences: 5 };
    assert!(enumerate_language(&dfa, 10, &tight).is_err());
}

#[test]
fn alignment_of_identity_vocab_matches_char_acceptance() {
    // Sanity anchor for the random-instance generator plumbing.
    let alphabet = Alphabet::from_str("ab").unwrap();
    let dfa = compile_pattern("ab", &alphabet, &CompileOptions::default()).unwrap();
    let vocab = Vocabulary::new(alphabet, ["a", "b"], None).unwrap();
    let a = align(&dfa, &vocab, &AlignOptions::default()).unwrap();
    let u = UnigramMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
    let e = brute_force_expected(&a, &u, &EnumerationBudget::default()).unwrap();
    assert!((e - 0.25).abs() < 1e-12);
}
