use super::*;
use crate::decoder::DecodeOptions;
use crate::juncture::build_vocabulary;
use crate::molgraph::desk_property;

const TOY: &[&str] = &[
    "CCO",
    "c1ccccc1",
    "CC(=O)O",
    "C1CCCCC1C",
    "Cc1ccccc1",
    "CCN",
];

fn toy() -> Vec<MolGraph> {
    TOY.iter().map(|s| parse_smiles(s).unwrap()).collect()
}

fn small() -> TrainConfig {
    TrainConfig {
        hidden_dim: 12,
        latent_dim: 8,
        message_iterations: 2,
        learning_rate: 0.01,
        batch_size: 4,
        epochs: 2,
        seed: 7,
        ..TrainConfig::default()
    }
}

fn run(cfg: &TrainConfig, jobs: usize) -> TrainOutcome {
    let corpus = toy();
    let vocab = build_vocabulary(&corpus).unwrap();
    train(&corpus, vocab, cfg, jobs, |_| {}).unwrap()
}

#[test]
fn config_round_trip() {
    let cfg = small();
    assert_eq!(TrainConfig::parse(&cfg.to_text()).unwrap(), cfg);
    let parsed = TrainConfig::parse("# toy\n\nhidden_dim = 32\nseed=3\n").unwrap();
    assert_eq!(parsed.hidden_dim, 32);
    assert_eq!(parsed.seed, 3);
    assert_eq!(parsed.latent_dim, 56);
}

#[test]
fn config_rejects_bad_input() {
    let err = TrainConfig::parse("seed=1\nwidth=3\n").unwrap_err();
    assert!(matches!(err, Error::AtLine { line: 2, .. }));
    assert!(TrainConfig::parse("latent_dim=7").is_err());
    assert!(TrainConfig::parse("batch_size=0").is_err());
    assert!(TrainConfig::parse("learning_rate=-1").is_err());
    assert!(TrainConfig::parse("epochs").is_err());
}

#[test]
fn kl_schedule_ramps_then_holds() {
    let cfg = TrainConfig {
        kl_weight: 0.5,
        ..TrainConfig::default()
    };
    assert_eq!(cfg.kl_weight_at(0, 100), 0.0);
    assert!((cfg.kl_weight_at(10, 100) - 0.25).abs() < 1e-15);
    assert_eq!(cfg.kl_weight_at(20, 100), 0.5);
    assert_eq!(cfg.kl_weight_at(99, 100), 0.5);
    let flat = TrainConfig {
        kl_anneal_fraction: 0.0,
        ..cfg
    };
    assert_eq!(flat.kl_weight_at(0, 100), 0.5);
}

#[test]
fn corpus_errors_carry_line_numbers() {
    let mols = read_corpus("CCO ethanol\n\n# comment\nc1ccccc1\n").unwrap();
    assert_eq!(mols.len(), 2);
    let err = read_corpus("CCO\nC(C\n").unwrap_err();
    assert!(matches!(err, Error::AtLine { line: 2, .. }));
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let cfg = TrainConfig {
        learning_rate: 0.0,
        epochs: 1,
        ..small()
    };
    let out = run(&cfg, 1);
    let fresh = Model::new(cfg.dims(), out.model.vocab.clone(), cfg.seed);
    assert_eq!(out.model.params, fresh.params);
    assert_eq!(out.metrics.len(), 2);
}

#[test]
fn zero_kl_weight_is_pure_reconstruction() {
    let corpus = toy();
    let vocab = build_vocabulary(&corpus).unwrap();
    let frags = Fragments::new(&vocab).unwrap();
    let model = Model::new(small().dims(), vocab.clone(), 1);
    for g in &corpus {
        let prep = prepare(g, &vocab, &frags, desk_property).unwrap();
        let w = LossWeights {
            kl: 0.0,
            property: 0.0,
        };
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
        let mut tape = Tape::new(&model.params);
        let (_, terms) = molecule_loss(&mut tape, &prep, 2, w, Some(&mut rng)).unwrap();

        // the same forward pass, composed by hand without any KL term
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
        let mut tape = Tape::new(&model.params);
        let (_, hg) = encode_graph_inputs(&mut tape, &prep.inputs, 2).unwrap();
        let enc = encode_tree(&mut tape, &prep.tree, Phase::Both).unwrap();
        let (mt, lt) = variational_head(&mut tape, enc.h_root, Part::Tree).unwrap();
        let (mg, lg) = variational_head(&mut tape, hg, Part::Graph).unwrap();
        let zt = reparameterize(&mut tape, mt, lt, Some(&mut rng)).unwrap();
        let zg = reparameterize(&mut tape, mg, lg, Some(&mut rng)).unwrap();
        let tl = tree_loss(&mut tape, &prep.plan, zt).unwrap();
        let gl = graph_loss(&mut tape, &prep.targets, &enc.messages, zg, 2).unwrap();
        let expected = tape.scalar(tl.loss) - tape.scalar(gl.log_likelihood);
        assert!(
            (terms.total - expected).abs() <= 1e-12,
            "{} vs {expected}",
            terms.total
        );
        assert_eq!(terms.kl, 0.0);
    }
}

#[test]
fn kl_term_matches_weighted_sum() {
    let corpus = toy();
    let vocab = build_vocabulary(&corpus).unwrap();
    let frags = Fragments::new(&vocab).unwrap();
    let model = Model::new(small().dims(), vocab.clone(), 2);
    let prep = prepare(&corpus[4], &vocab, &frags, desk_property).unwrap();
    let mut tape = Tape::new(&model.params);
    let w = LossWeights {
        kl: 0.3,
        property: 0.0,
    };
    let (_, t) = molecule_loss::<Xoshiro256PlusPlus>(&mut tape, &prep, 2, w, None).unwrap();
    assert!(t.kl > 0.0);
    assert!((t.total - (t.tree + t.assembly + 0.3 * t.kl)).abs() < 1e-9);
}

#[test]
fn training_is_deterministic_across_jobs() {
    let cfg = small();
    let a = run(&cfg, 1);
    let b = run(&cfg, 1);
    let c = run(&cfg, 3);
    assert_eq!(a.checkpoint(), b.checkpoint());
    assert_eq!(a.checkpoint(), c.checkpoint());
    assert_eq!(a.metrics, c.metrics);
    let d = run(&TrainConfig { seed: 8, ..cfg }, 1);
    assert_ne!(a.checkpoint(), d.checkpoint());
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    let out = run(&small(), 1);
    let bytes = out.checkpoint();
    let (model, cfg) = load_checkpoint(&bytes).unwrap();
    assert_eq!(cfg, small());
    assert_eq!(model.to_checkpoint(&cfg.to_text()), bytes);
}

#[test]
fn loss_goes_down() {
    let cfg = TrainConfig {
        epochs: 15,
        kl_weight: 0.01,
        ..small()
    };
    let out = run(&cfg, 1);
    let first = out.metrics[..2]
        .iter()
        .map(|m| m.loss.tree + m.loss.assembly)
        .sum::<f64>();
    let last = out.metrics[out.metrics.len() - 2..]
        .iter()
        .map(|m| m.loss.tree + m.loss.assembly)
        .sum::<f64>();
    assert!(last < 0.7 * first, "{first} -> {last}");
    let line = out.metrics[0].to_string();
    assert!(line.starts_with("step=0 epoch=0 loss="), "{line}");
}

#[test]
fn oov_names_the_molecule() {
    let corpus = toy();
    let vocab = build_vocabulary(&corpus[..2]).unwrap();
    let err = train(&corpus, vocab, &small(), 1, |_| {}).unwrap_err();
    assert!(matches!(err, Error::AtLine { line: 3, .. }), "{err}");
    assert!(matches!(err.root(), Error::OovCluster(_)));
}

#[test]
fn empty_corpus_is_rejected() {
    let vocab = build_vocabulary(&toy()).unwrap();
    let frags = Fragments::new(&vocab).unwrap();
    let model = Model::new(small().dims(), vocab.clone(), 0);
    let opts = EvalOptions::default();
    assert_eq!(
        evaluate_reconstruction(&model, &frags, &[], 2, 2, &opts),
        Err(Error::EmptyCorpus)
    );
    assert_eq!(
        reconstruction_accuracy(&model, &frags, &[], &opts),
        Err(Error::EmptyCorpus)
    );
    assert_eq!(
        train(&[], vocab, &small(), 1, |_| {}).unwrap_err(),
        Error::EmptyCorpus
    );
}

#[test]
fn untrained_prior_samples_are_valid() {
    let corpus = toy();
    let vocab = build_vocabulary(&corpus).unwrap();
    let frags = Fragments::new(&vocab).unwrap();
    let model = Model::new(small().dims(), vocab, 3);
    let opts = EvalOptions {
        decode: DecodeOptions::sample(),
        seed: 11,
        jobs: 2,
    };
    let r = evaluate_prior_validity(&model, &frags, 20, 3, Some(&corpus), &opts).unwrap();
    assert_eq!(r.total, 60);
    assert_eq!(r.validity, 1.0);
    assert!(r.distinct > 0.0 && r.distinct <= 1.0);
    assert!(r.uniqueness.is_some_and(|u| (0.0..=1.0).contains(&u)));
    let again = evaluate_prior_validity(
        &model,
        &frags,
        20,
        3,
        Some(&corpus),
        &EvalOptions { jobs: 1, ..opts },
    )
    .unwrap();
    assert_eq!(r, again);
}

#[test]
fn monte_carlo_reconstruction_bounds() {
    let corpus = toy();
    let vocab = build_vocabulary(&corpus).unwrap();
    let frags = Fragments::new(&vocab).unwrap();
    let mut model = Model::new(small().dims(), vocab, 3);
    let opts = EvalOptions::default();
    let mc = evaluate_reconstruction(&model, &frags, &corpus, 3, 3, &opts).unwrap();
    assert!((0.0..=1.0).contains(&mc));

    // with the log-variance pinned at its floor, posterior draws sit on μ
    for name in ["Wlv_T", "Wlv_G"] {
        let id = model.params.id(name).unwrap();
        model.params.get_mut(id).value.fill(0.0);
    }
    for name in ["blv_T", "blv_G"] {
        let id = model.params.id(name).unwrap();
        model.params.get_mut(id).value.fill(-1e6);
    }
    let det = reconstruction_accuracy(&model, &frags, &corpus, &opts).unwrap();
    let mc = evaluate_reconstruction(&model, &frags, &corpus, 2, 2, &opts).unwrap();
    assert_eq!(det, mc);
}
