//! Corpus ingestion, VAE loss composition, the training loop and the
//! reconstruction and prior evaluations.

mod config;
mod eval;

pub use config::TrainConfig;
pub use eval::{
    encode_molecule, evaluate_prior_validity, evaluate_reconstruction, is_valid_smiles,
    reconstruction_accuracy, Encoding, EvalOptions, PriorReport,
};

use crate::decoder::{graph_loss, teacher_targets, tree_loss, Fragments, NodeTarget, TreePlan};
use crate::encoder::{
    encode_graph_inputs, encode_tree, kl_divergence, reparameterize, variational_head, GraphInputs,
    Part, Phase, TreeGraph,
};
use crate::error::{Error, Result};
use crate::juncture::{assign_labels, decompose, Vocabulary};
use crate::latentopt::property_head;
use crate::model::Model;
use crate::molgraph::{parse_smiles, write_canonical, MolGraph, PropertyFn, PropertyRegistry};
use crate::tensor::{read_checkpoint, Adam, Gradients, Tape, Tensor, Var};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use std::fmt;

/// Reads one molecule per line: the first whitespace-separated field is
/// the SMILES, anything after it is ignored. Blank lines and `#` lines are
/// skipped. Errors carry the 1-based line number.
pub fn read_corpus(text: &str) -> Result<Vec<MolGraph>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let Some(smiles) = line.split_whitespace().next() else {
            continue;
        };
        if smiles.starts_with('#') {
            continue;
        }
        out.push(parse_smiles(smiles).map_err(|e| e.at_line(i + 1))?);
    }
    Ok(out)
}

/// Everything the loss needs about one molecule, computed once.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub graph: MolGraph,
    pub canonical: String,
    pub inputs: GraphInputs,
    pub tree: TreeGraph,
    pub plan: TreePlan,
    pub targets: Vec<NodeTarget>,
    pub property: f64,
}

pub fn prepare(
    g: &MolGraph,
    vocab: &Vocabulary,
    frags: &Fragments,
    property: PropertyFn,
) -> Result<Prepared> {
    let t = decompose(g)?;
    let ids = assign_labels(&t, vocab)?;
    Ok(Prepared {
        graph: g.clone(),
        canonical: write_canonical(g),
        inputs: GraphInputs::new(g),
        tree: TreeGraph::from_junction(&t, &ids),
        plan: TreePlan::from_junction(&t, &ids),
        targets: teacher_targets(g, &t, &ids, frags)?,
        property: property(g),
    })
}

/// Prepares every molecule; an error names the 1-based corpus position.
pub fn prepare_corpus(
    corpus: &[MolGraph],
    vocab: &Vocabulary,
    frags: &Fragments,
    property: PropertyFn,
    jobs: usize,
) -> Result<Vec<Prepared>> {
    par_map(jobs, corpus, |i, g| {
        prepare(g, vocab, frags, property).map_err(|e| e.at_line(i + 1))
    })?
    .into_iter()
    .collect()
}

/// An optional thread pool; one thread runs inline.
pub(crate) struct Workers(Option<rayon::ThreadPool>);

impl Workers {
    pub(crate) fn new(jobs: usize) -> Result<Workers> {
        if jobs <= 1 {
            return Ok(Workers(None));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map(|p| Workers(Some(p)))
            .map_err(|e| Error::Config(format!("thread pool: {e}")))
    }

    /// Maps `f` over `items`; output order follows input order.
    pub(crate) fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(usize, &T) -> U + Sync + Send,
    {
        match &self.0 {
            None => items.iter().enumerate().map(|(i, x)| f(i, x)).collect(),
            Some(pool) => {
                pool.install(|| items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect())
            }
        }
    }
}

/// Maps `f` over `items` on `jobs` threads; output order follows input order.
pub(crate) fn par_map<T, U, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync + Send,
{
    Ok(Workers::new(jobs)?.map(items, f))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub kl: f64,
    pub property: f64,
}

/// Loss components of one molecule or, summed, of a batch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossTerms {
    pub total: f64,
    /// Topological plus label cross-entropy.
    pub tree: f64,
    /// Negative log-likelihood of the true assembly choices.
    pub assembly: f64,
    pub kl: f64,
    /// Squared error of the property head; 0 when disabled.
    pub property: f64,
}

impl LossTerms {
    fn add(&mut self, o: &LossTerms) {
        self.total += o.total;
        self.tree += o.tree;
        self.assembly += o.assembly;
        self.kl += o.kl;
        self.property += o.property;
    }

    fn scaled(&self, s: f64) -> LossTerms {
        LossTerms {
            total: self.total * s,
            tree: self.tree * s,
            assembly: self.assembly * s,
            kl: self.kl * s,
            property: self.property * s,
        }
    }
}

/// `tree + assembly + w.kl · KL (+ w.property · (F(μ) − y)²)`. Terms with
/// weight 0 are left off the tape. With no rng, z = μ.
pub fn molecule_loss<R: Rng>(
    tape: &mut Tape,
    prep: &Prepared,
    depth: usize,
    w: LossWeights,
    mut rng: Option<&mut R>,
) -> Result<(Var, LossTerms)> {
    let (_, h_graph) = encode_graph_inputs(tape, &prep.inputs, depth)?;
    let enc = encode_tree(tape, &prep.tree, Phase::Both)?;
    let (mu_t, lv_t) = variational_head(tape, enc.h_root, Part::Tree)?;
    let (mu_g, lv_g) = variational_head(tape, h_graph, Part::Graph)?;
    let z_t = reparameterize(tape, mu_t, lv_t, rng.as_deref_mut())?;
    let z_g = reparameterize(tape, mu_g, lv_g, rng)?;

    let tl = tree_loss(tape, &prep.plan, z_t)?;
    let gl = graph_loss(tape, &prep.targets, &enc.messages, z_g, depth)?;
    let mut total = tape.sub(tl.loss, gl.log_likelihood)?;
    let mut terms = LossTerms {
        tree: tape.scalar(tl.loss),
        assembly: -tape.scalar(gl.log_likelihood),
        ..LossTerms::default()
    };
    if w.kl != 0.0 {
        let a = kl_divergence(tape, mu_t, lv_t)?;
        let b = kl_divergence(tape, mu_g, lv_g)?;
        let kl = tape.add(a, b)?;
        terms.kl = tape.scalar(kl);
        let weighted = tape.scale(kl, w.kl);
        total = tape.add(total, weighted)?;
    }
    if w.property != 0.0 {
        let mu = tape.concat_cols(&[mu_t, mu_g])?;
        let pred = property_head(tape, mu)?;
        let y = tape.input(Tensor::scalar(prep.property));
        let diff = tape.sub(pred, y)?;
        let sq = tape.square(diff);
        terms.property = tape.scalar(sq);
        let weighted = tape.scale(sq, w.property);
        total = tape.add(total, weighted)?;
    }
    terms.total = tape.scalar(total);
    Ok((total, terms))
}

fn molecule_grad(
    model: &Model,
    prep: &Prepared,
    w: LossWeights,
    seed: u64,
) -> Result<(Gradients, LossTerms)> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut tape = Tape::new(&model.params);
    let (loss, terms) = molecule_loss(&mut tape, prep, model.dims.depth, w, Some(&mut rng))?;
    Ok((tape.backward(loss)?, terms))
}

/// One optimizer step, averaged over its batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub epoch: usize,
    pub loss: LossTerms,
    pub kl_weight: f64,
    pub lr: f64,
}

impl fmt::Display for StepMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "step={} epoch={} loss={:.6} tree={:.6} assembly={:.6} kl={:.6} property={:.6} kl_weight={:.6} lr={:.3e}",
            self.step,
            self.epoch,
            self.loss.total,
            self.loss.tree,
            self.loss.assembly,
            self.loss.kl,
            self.loss.property,
            self.kl_weight,
            self.lr
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub config: TrainConfig,
    pub metrics: Vec<StepMetrics>,
}

impl TrainOutcome {
    pub fn checkpoint(&self) -> Vec<u8> {
        self.model.to_checkpoint(&self.config.to_text())
    }
}

/// Model and config stored in checkpoint bytes.
pub fn load_checkpoint(bytes: &[u8]) -> Result<(Model, TrainConfig)> {
    let data = read_checkpoint(bytes)?;
    let cfg = TrainConfig::parse(&data.config).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let model = Model::from_data(&data, cfg.dims())?;
    Ok((model, cfg))
}

/// Seeds the shuffle and noise stream apart from initialization.
const STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Trains with the property named in `cfg`.
pub fn train(
    corpus: &[MolGraph],
    vocab: Vocabulary,
    cfg: &TrainConfig,
    jobs: usize,
    on_step: impl FnMut(&StepMetrics),
) -> Result<TrainOutcome> {
    let property = PropertyRegistry::default()
        .get(&cfg.property)
        .ok_or_else(|| Error::Config(format!("unknown property `{}`", cfg.property)))?;
    train_with_property(corpus, vocab, cfg, property, jobs, on_step)
}

/// Adam over seed-shuffled batches. Each molecule draws its own noise seed
/// from the run's stream, so results do not depend on `jobs`.
pub fn train_with_property(
    corpus: &[MolGraph],
    vocab: Vocabulary,
    cfg: &TrainConfig,
    property: PropertyFn,
    jobs: usize,
    mut on_step: impl FnMut(&StepMetrics),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let frags = Fragments::new(&vocab)?;
    let data = prepare_corpus(corpus, &vocab, &frags, property, jobs)?;
    let mut model = Model::new(cfg.dims(), vocab, cfg.seed);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed ^ STREAM);
    let total_steps = cfg.epochs * data.len().div_ceil(cfg.batch_size);
    let mut adam = Adam::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut metrics = Vec::with_capacity(total_steps);
    let workers = Workers::new(jobs)?;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        adam.lr = cfg.lr_at(epoch);
        for batch in order.chunks(cfg.batch_size) {
            let step = metrics.len();
            let w = LossWeights {
                kl: cfg.kl_weight_at(step, total_steps),
                property: cfg.property_weight,
            };
            let work: Vec<(usize, u64)> = batch.iter().map(|&i| (i, rng.random())).collect();
            let scale = 1.0 / batch.len() as f64;
            let mut sum = LossTerms::default();
            let run = |&(i, seed): &(usize, u64), model: &Model| {
                molecule_grad(model, &data[i], w, seed).map_err(|e| e.at_line(i + 1))
            };
            if jobs <= 1 {
                for item in &work {
                    let (g, t) = run(item, &model)?;
                    model.params.accumulate_scaled(&g, scale);
                    sum.add(&t);
                }
            } else {
                let results = workers.map(&work, |_, item| run(item, &model));
                for r in results {
                    let (g, t) = r?;
                    model.params.accumulate_scaled(&g, scale);
                    sum.add(&t);
                }
            }
            adam.step(&mut model.params);
            let m = StepMetrics {
                step,
                epoch,
                loss: sum.scaled(scale),
                kl_weight: w.kl,
                lr: adam.lr,
            };
            on_step(&m);
            metrics.push(m);
        }
    }
    Ok(TrainOutcome {
        model,
        config: cfg.clone(),
        metrics,
    })
}

#[cfg(test)]
mod tests;
