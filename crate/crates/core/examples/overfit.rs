//! Trains a small model to memorize the bundled 20-molecule toy set and
//! reports deterministic reconstruction (z = μ, greedy decoding).
//!
//! cargo run --release --example overfit -- [epochs] [hidden_dim] [latent_dim]

use jtvae::decoder::Fragments;
use jtvae::juncture::build_vocabulary;
use jtvae::train::{read_corpus, reconstruction_accuracy, train, EvalOptions, TrainConfig};
use std::time::Instant;

const TOY: &str = include_str!("../data/toy20.smi");

fn arg(i: usize, default: usize) -> usize {
    std::env::args()
        .nth(i)
        .and_then(|a| a.parse().ok())
        .unwrap_or(default)
}

fn main() -> jtvae::Result<()> {
    let corpus = read_corpus(TOY)?;
    let vocab = build_vocabulary(&corpus)?;
    let cfg = TrainConfig {
        epochs: arg(1, 150),
        hidden_dim: arg(2, 64),
        latent_dim: arg(3, 16),
        learning_rate: 0.005,
        lr_decay: 0.99,
        batch_size: 4,
        kl_weight: 0.005,
        seed: 1,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let out = train(&corpus, vocab, &cfg, 4, |m| {
        if m.step % 100 == 0 {
            println!("{m}");
        }
    })?;
    let frags = Fragments::new(&out.model.vocab)?;
    let acc = reconstruction_accuracy(&out.model, &frags, &corpus, &EvalOptions::default())?;
    println!("reconstruction={acc:.3} elapsed={:.1?}", start.elapsed());
    Ok(())
}
