//! Decodes prior samples with an untrained model. Feasibility masking and
//! valence-checked assembly make every decode a valid molecule; the trace
//! of the first decode shows each tree and assembly decision.

use jtvae::decoder::{decode, DecodeOptions, Fragments};
use jtvae::juncture::build_vocabulary;
use jtvae::model::{Model, ModelDims};
use jtvae::train::read_corpus;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

const TOY: &str = include_str!("../data/toy20.smi");

fn main() -> jtvae::Result<()> {
    let vocab = build_vocabulary(&read_corpus(TOY)?)?;
    let frags = Fragments::new(&vocab)?;
    let dims = ModelDims {
        hidden: 32,
        latent_tree: 4,
        latent_graph: 4,
        depth: 3,
    };
    let model = Model::new(dims, vocab, 11);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
    let opts = DecodeOptions {
        max_nodes: 12,
        ..DecodeOptions::sample()
    };
    for k in 0..10 {
        let mut draw = || {
            (0..4)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect::<Vec<f64>>()
        };
        let (zt, zg) = (draw(), draw());
        let d = decode(&model, &frags, &zt, &zg, &opts, &mut rng)?;
        d.molecule.check_valence()?;
        println!("{k}\t{}\tnodes={}", d.smiles, d.tree.labels.len());
        if k == 0 {
            for line in d.trace_lines() {
                println!("  {line}");
            }
        }
    }
    Ok(())
}
