//! Latent-space optimization on a jointly trained toy checkpoint.

mod common;

use common::toy;
use jtvae::decoder::Fragments;
use jtvae::juncture::build_vocabulary;
use jtvae::latentopt::{report, select, train_joint, trajectories, OptOptions, SIMILARITY_RADIUS};
use jtvae::molgraph::{desk_property, morgan_fingerprint, parse_smiles, tanimoto, write_canonical};
use jtvae::train::TrainConfig;

#[test]
fn ascent_and_selection_on_the_toy_model() {
    let mols = toy();
    let vocab = build_vocabulary(&mols).unwrap();
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
    let model = train_joint(&mols, vocab, &cfg, desk_property, 4, |_| {})
        .unwrap()
        .model;
    let frags = Fragments::new(&model.vocab).unwrap();

    // the 20 lowest-property training molecules: here the whole toy set
    let mut inputs = mols.clone();
    inputs.sort_by(|a, b| desk_property(a).total_cmp(&desk_property(b)));
    inputs.truncate(20);

    let trajs = trajectories(
        &model,
        &frags,
        &inputs,
        desk_property,
        &OptOptions::default(),
        4,
    )
    .unwrap();
    let rising = trajs.iter().filter(|t| t.end >= t.start).count();
    assert!(
        rising * 5 >= trajs.len() * 4,
        "F rose on {rising} of {}",
        trajs.len()
    );

    let results: Vec<_> = trajs.iter().map(|t| select(t, 0.0)).collect();
    let summary = report(&results).unwrap();
    assert!(summary.success_rate >= 0.5, "{summary}");

    for (g, (t, r)) in inputs.iter().zip(trajs.iter().zip(&results)) {
        assert_eq!(t.original, write_canonical(g));
        let Some(best) = &r.best else { continue };
        let m = parse_smiles(best).unwrap();
        m.check_valence().unwrap();
        let sim = tanimoto(
            &morgan_fingerprint(g, SIMILARITY_RADIUS),
            &morgan_fingerprint(&m, SIMILARITY_RADIUS),
        );
        assert_eq!(r.similarity, Some(sim));
        assert!((r.improvement.unwrap() - (desk_property(&m) - desk_property(g))).abs() < 1e-12);
    }
}
