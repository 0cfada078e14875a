//! The five composite forwards, each reduced to a scalar for gradient checks.

use super::fd::{check, GradCheck};
use jtvae::decoder::{score_candidate, tree_loss, Fragments};
use jtvae::encoder::{encode_graph_inputs, encode_tree, Phase};
use jtvae::juncture::build_vocabulary;
use jtvae::model::{Model, ModelDims};
use jtvae::molgraph::{desk_property, parse_smiles, MolGraph};
use jtvae::train::{prepare, Prepared};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Ring, fused, charged and bridged molecules, each with at least one
/// neighborhood that has several candidates.
pub const MOLECULES: &[&str] = &[
    "Cc1ccc2ccccc2c1",
    "CC1CCC(Cc2ccccc2)CC1O",
    "O=C(O)c1ccc(Cl)nc1",
    "CC(C)(C)c1ccc([N+](=O)[O-])cc1",
    "NCC1CC2CCC1C2",
];

pub const DIMS: ModelDims = ModelDims {
    hidden: 7,
    latent_tree: 4,
    latent_graph: 4,
    depth: 2,
};

pub const NAMES: [&str; 5] = [
    "graph encoder",
    "tree GRU",
    "topological head",
    "label head",
    "assembly scorer",
];

pub struct Fixture {
    pub model: Model,
    pub prep: Prepared,
    pub probe: Vec<f64>,
    pub z: Vec<f64>,
}

/// Seed `s` picks molecule `s mod 5`, fresh weights and random probes.
pub fn fixture(seed: u64) -> Fixture {
    let mols: Vec<MolGraph> = MOLECULES.iter().map(|s| parse_smiles(s).unwrap()).collect();
    let vocab = build_vocabulary(&mols).unwrap();
    let frags = Fragments::new(&vocab).unwrap();
    let g = &mols[seed as usize % mols.len()];
    let prep = prepare(g, &vocab, &frags, desk_property).unwrap();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ 0xfd);
    let mut draw = |n: usize| {
        (0..n)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect::<Vec<f64>>()
    };
    let probe = draw(DIMS.hidden);
    let z = draw(DIMS.latent_tree);
    Fixture {
        model: Model::new(DIMS, vocab, seed),
        prep,
        probe,
        z,
    }
}

pub fn run(which: usize, f: &Fixture) -> GradCheck {
    let store = &f.model.params;
    let depth = DIMS.depth;
    match which {
        0 => check(
            store,
            &["W1g", "W2g", "W3g", "U1g", "U2g"],
            &f.probe,
            |t, r| {
                let (_, hg) = encode_graph_inputs(t, &f.prep.inputs, depth).unwrap();
                t.dot(hg, r).unwrap()
            },
        ),
        1 => check(
            store,
            &[
                "emb", "Wz", "Uz", "bz", "Wr", "Ur", "br", "W", "U", "Wo", "Uo",
            ],
            &f.probe,
            |t, r| {
                let enc = encode_tree(t, &f.prep.tree, Phase::Both).unwrap();
                t.dot(enc.h_root, r).unwrap()
            },
        ),
        2 => check(store, &["Wd1", "Wd2", "Wd3", "ud"], &f.z, |t, z| {
            tree_loss(t, &f.prep.plan, z).unwrap().loss
        }),
        3 => check(store, &["Wl1", "Wl2", "Ul"], &f.z, |t, z| {
            tree_loss(t, &f.prep.plan, z).unwrap().loss
        }),
        4 => {
            let target = f
                .prep
                .targets
                .first()
                .expect("a neighborhood with several candidates");
            let cand = &target.candidates[target.truth];
            check(
                store,
                &["Wa1", "Wa2", "Wa3", "Ua1", "Ua2", "Wz", "W"],
                &f.z,
                |t, zg| {
                    let enc = encode_tree(t, &f.prep.tree, Phase::Both).unwrap();
                    score_candidate(t, cand, &enc.messages, zg, depth).unwrap()
                },
            )
        }
        _ => unreachable!("five composites"),
    }
}
