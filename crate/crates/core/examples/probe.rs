use dfaguide::aligned::{align, AlignOptions};
use dfaguide::compile::{compile_pattern, minimize, CompileOptions};
use dfaguide::diffusion::{sample, train, GuidanceConfig, TrainConfig};
use dfaguide::toy;

fn main() {
    let vocab = toy::standard_vocab();
    let corpus = toy::balanced_corpus(192, 3, 6, &vocab, 16, 99).unwrap();
    let alphabet = toy::standard_alphabet();
    let letters = "abcdefghijklmnopqrstuvwxyz";
    for hidden in [64usize, 96] {
        let mut config = TrainConfig::default();
        config.model.hidden_dim = hidden;
        config.model.beta_max = 0.05;
        let t0 = std::time::Instant::now();
        let outcome = train(&corpus, vocab.clone(), &config, 8000, 7).unwrap();
        println!("h={hidden}: trained {:.0}s loss {:.4}", t0.elapsed().as_secs_f64(), outcome.epoch_losses.last().unwrap());
        let mut totals = [0usize, 0usize];
        for word in ["star", "grass", "cat", "window"] {
            for (name, raw) in [
                ("prefix", format!("{word}( [{letters}]+)*")),
                ("suffix", format!("([{letters}]+ )*{word}")),
            ] {
                let padded = format!(".*({raw}).*");
                let dfa = minimize(&compile_pattern(&padded, &alphabet, &CompileOptions::default()).unwrap());
                let auto = align(&dfa, &vocab, &AlignOptions::default()).unwrap();
                for (gi, gamma) in [0.0, 2.5].into_iter().enumerate() {
                    let cfg = GuidanceConfig { gamma, ..Default::default() };
                    let mut sat = 0;
                    for i in 0..50u64 {
                        let out = sample(&outcome.model, Some(&auto), &cfg, 200, 7000 + i).unwrap();
                        if dfa.accepts(&out.text).unwrap() { sat += 1; }
                    }
                    println!("h={hidden} {word} {name} gamma={gamma}: {sat}/50");
                    totals[gi] += sat;
                }
            }
        }
        println!("h={hidden} TOTAL gamma=0: {}/400, gamma=2.5: {}/400", totals[0], totals[1]);
    }
}
