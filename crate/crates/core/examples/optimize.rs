//! Trains a toy model jointly with the property head, then climbs the
//! predicted property in latent space from each molecule and reports the
//! best decoded improvement at several similarity thresholds.

use jtvae::decoder::Fragments;
use jtvae::juncture::build_vocabulary;
use jtvae::latentopt::{report, select, train_joint, trajectories, OptOptions};
use jtvae::molgraph::desk_property;
use jtvae::train::{read_corpus, TrainConfig};

const TOY: &str = include_str!("../data/toy20.smi");

fn main() -> jtvae::Result<()> {
    let mols = read_corpus(TOY)?;
    let cfg = TrainConfig {
        hidden_dim: 64,
        latent_dim: 16,
        learning_rate: 0.005,
        lr_decay: 0.99,
        batch_size: 4,
        epochs: 150,
        kl_weight: 0.005,
        seed: 1,
        ..TrainConfig::default()
    };
    let model = train_joint(
        &mols,
        build_vocabulary(&mols)?,
        &cfg,
        desk_property,
        4,
        |_| {},
    )?
    .model;
    let frags = Fragments::new(&model.vocab)?;
    let trajs = trajectories(
        &model,
        &frags,
        &mols,
        desk_property,
        &OptOptions::default(),
        4,
    )?;
    for delta in [0.0, 0.2, 0.4, 0.6] {
        let results: Vec<_> = trajs.iter().map(|t| select(t, delta)).collect();
        println!("delta={delta:.1} {}", report(&results)?);
    }
    for t in trajs.iter().take(5) {
        let r = select(t, 0.0);
        println!("{} -> {}", t.original, r.best.as_deref().unwrap_or("none"));
    }
    Ok(())
}
