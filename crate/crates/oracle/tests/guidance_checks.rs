//! Finite-difference verification of the full guidance chain rule:
//! `grad_x log E(decode(x))` assembled through the softmax decoder against
//! central differences of the forward-only scalar.

use dfaguide::aligned::{align, AlignOptions};
use dfaguide::alphabet::Alphabet;
use dfaguide::compile::{compile_pattern, minimize, CompileOptions};
use dfaguide::diffusion::{guidance_gradient, DiffusionModel, GuidanceConfig, ModelConfig};
use dfaguide::expected_probability;
use dfaguide::vocab::Vocabulary;
use dfaguide_oracle::{finite_difference, max_relative_error};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn toy_model(seed: u64) -> DiffusionModel {
    let alphabet = Alphabet::from_str("abc").unwrap();
    let vocab = Vocabulary::new(alphabet, ["a", "b", "c", "ab", "bc", "ca"], None).unwrap();
    let config = ModelConfig {
        seq_len: 4,
        embed_dim: 8,
        hidden_dim: 16,
        timesteps: 40,
        ..ModelConfig::default()
    };
    DiffusionModel::new(config, vocab, seed).unwrap()
}

#[test]
fn latent_gradient_matches_finite_differences() {
    let patterns = ["a(b|c)*", ".*b.*", "(ab|ca)+", "a?b?c?a?"];
    let cfg = GuidanceConfig {
        gamma: 1.0,
        clip_norm: f64::INFINITY,
        ..GuidanceConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(321);
    let mut checked = 0;
    for (i, pattern) in patterns.iter().cycle().take(8).enumerate() {
        let model = toy_model(100 + i as u64);
        let dfa = minimize(
            &compile_pattern(pattern, model.vocab().alphabet(), &CompileOptions::default())
                .unwrap(),
        );
        let automaton = align(&dfa, model.vocab(), &AlignOptions::default()).unwrap();
        let x = Array2::from_shape_fn((4, 8), |_| rng.sample::<f64, _>(StandardNormal) * 0.5);

        let analytic = guidance_gradient(&model, &x, &automaton, &cfg).unwrap();
        let fd = finite_difference(
            |p| {
                let u = model.decode(p)?.smoothed(cfg.lambda_smooth);
                Ok(expected_probability(&automaton, &u)?.log_expected)
            },
            &x,
            1e-5,
        )
        .unwrap();
        let err = max_relative_error(&analytic, &fd, 1e-3);
        assert!(err <= 1e-3, "pattern {pattern}: relative error {err}");
        checked += 1;
    }
    assert_eq!(checked, 8);
}

#[test]
fn clipping_only_shrinks_rows() {
    let model = toy_model(9);
    let dfa = minimize(
        &compile_pattern("a+", model.vocab().alphabet(), &CompileOptions::default()).unwrap(),
    );
    let automaton = align(&dfa, model.vocab(), &AlignOptions::default()).unwrap();
    let x = Array2::from_elem((4, 8), 0.2);
    let unclipped = guidance_gradient(
        &model,
        &x,
        &automaton,
        &GuidanceConfig {
            clip_norm: f64::INFINITY,
            ..GuidanceConfig::default()
        },
    )
    .unwrap();
    let tight = 1e-3;
    let clipped = guidance_gradient(
        &model,
        &x,
        &automaton,
        &GuidanceConfig {
            clip_norm: tight,
            ..GuidanceConfig::default()
        },
    )
    .unwrap();
    for k in 0..4 {
        let norm_a: f64 = unclipped.row(k).dot(&unclipped.row(k)).sqrt();
        let norm_b: f64 = clipped.row(k).dot(&clipped.row(k)).sqrt();
        assert!(norm_b <= tight + 1e-12);
        if norm_a > tight {
            // Direction preserved.
            let cos = unclipped.row(k).dot(&clipped.row(k)) / (norm_a * norm_b);
            assert!((cos - 1.0).abs() < 1e-9);
        }
    }
}
