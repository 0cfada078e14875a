//! Posterior encodings and the reconstruction and prior-sampling protocols.

use super::Workers;
use crate::decoder::{decode, DecodeMode, DecodeOptions, Fragments};
use crate::encoder::{encode_graph, encode_tree, variational_head, Part, Phase, TreeGraph};
use crate::error::{Error, Result};
use crate::juncture::{assign_labels, decompose};
use crate::model::Model;
use crate::molgraph::{parse_smiles, write_canonical, MolGraph};
use crate::tensor::Tape;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use std::collections::HashSet;
use std::fmt;

/// Posterior mean and log-variance of both latent halves.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub mu_tree: Vec<f64>,
    pub lv_tree: Vec<f64>,
    pub mu_graph: Vec<f64>,
    pub lv_graph: Vec<f64>,
}

impl Encoding {
    /// `[μ_tree, μ_graph]`.
    pub fn mean(&self) -> Vec<f64> {
        [self.mu_tree.as_slice(), &self.mu_graph].concat()
    }

    /// One draw from the posterior, as (z_tree, z_graph).
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let mut draw = |mu: &[f64], lv: &[f64]| -> Vec<f64> {
            mu.iter()
                .zip(lv)
                .map(|(m, l)| m + (0.5 * l).exp() * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let t = draw(&self.mu_tree, &self.lv_tree);
        let g = draw(&self.mu_graph, &self.lv_graph);
        (t, g)
    }
}

/// Encodes `g`; fails with `OovCluster` if a cluster is outside the
/// model's vocabulary.
pub fn encode_molecule(model: &Model, g: &MolGraph) -> Result<Encoding> {
    let t = decompose(g)?;
    let ids = assign_labels(&t, &model.vocab)?;
    let mut tape = Tape::new(&model.params);
    let (_, h_graph) = encode_graph(&mut tape, g, model.dims.depth)?;
    let enc = encode_tree(
        &mut tape,
        &TreeGraph::from_junction(&t, &ids),
        Phase::BottomUp,
    )?;
    let (mu_t, lv_t) = variational_head(&mut tape, enc.h_root, Part::Tree)?;
    let (mu_g, lv_g) = variational_head(&mut tape, h_graph, Part::Graph)?;
    let row = |v| tape.value(v).data.clone();
    Ok(Encoding {
        mu_tree: row(mu_t),
        lv_tree: row(lv_t),
        mu_graph: row(mu_g),
        lv_graph: row(lv_g),
    })
}

/// A SMILES string that parses into a connected, valence-valid molecule.
pub fn is_valid_smiles(s: &str) -> bool {
    parse_smiles(s).is_ok_and(|g| g.check_valence().is_ok() && g.is_connected())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub decode: DecodeOptions,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            decode: DecodeOptions::default(),
            seed: 0,
            jobs: 1,
        }
    }
}

/// Per-item seeds drawn in order from the run seed, so results do not
/// depend on the number of threads.
fn item_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

/// Fraction of molecules whose greedy decode of z = μ is identical to the
/// input by canonical string.
pub fn reconstruction_accuracy(
    model: &Model,
    frags: &Fragments,
    corpus: &[MolGraph],
    opts: &EvalOptions,
) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let dec = DecodeOptions {
        mode: DecodeMode::Greedy,
        ..opts.decode
    };
    let hits = Workers::new(opts.jobs)?.map(corpus, |i, g| -> Result<bool> {
        let e = encode_molecule(model, g).map_err(|e| e.at_line(i + 1))?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(0);
        let d = decode(model, frags, &e.mu_tree, &e.mu_graph, &dec, &mut rng)?;
        Ok(d.smiles == write_canonical(g))
    });
    let hits = hits.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / corpus.len() as f64)
}

/// Monte Carlo reconstruction: each molecule is encoded `n_enc` times by
/// posterior sampling and each encoding decoded `n_dec` times. Returns the
/// mean fraction of decodes identical to the input. Greedy decoding is
/// deterministic given z, so it runs once per encoding.
pub fn evaluate_reconstruction(
    model: &Model,
    frags: &Fragments,
    corpus: &[MolGraph],
    n_enc: usize,
    n_dec: usize,
    opts: &EvalOptions,
) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if n_enc == 0 || n_dec == 0 {
        return Err(Error::Config("n_enc and n_dec must be positive".into()));
    }
    let seeds = item_seeds(opts.seed, corpus.len());
    let decodes = match opts.decode.mode {
        DecodeMode::Greedy => 1,
        DecodeMode::Sample => n_dec,
    };
    let rates = Workers::new(opts.jobs)?.map(corpus, |i, g| -> Result<f64> {
        let e = encode_molecule(model, g).map_err(|e| e.at_line(i + 1))?;
        let target = write_canonical(g);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seeds[i]);
        let mut hits = 0;
        for _ in 0..n_enc {
            let (zt, zg) = e.sample(&mut rng);
            for _ in 0..decodes {
                let d = decode(model, frags, &zt, &zg, &opts.decode, &mut rng)?;
                hits += usize::from(d.smiles == target);
            }
        }
        Ok(hits as f64 / (n_enc * decodes) as f64)
    });
    let rates = rates.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(rates.iter().sum::<f64>() / corpus.len() as f64)
}

/// Outcome of decoding prior samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorReport {
    /// Canonical strings of valid decodes, in sampling order.
    pub samples: Vec<String>,
    pub total: usize,
    pub validity: f64,
    /// Distinct valid strings over all decodes.
    pub distinct: f64,
    /// Valid decodes absent from the training set, over all decodes; only
    /// when a training set is given.
    pub uniqueness: Option<f64>,
}

impl fmt::Display for PriorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "samples={} valid={} validity={:.6} distinct={:.6}",
            self.total,
            self.samples.len(),
            self.validity,
            self.distinct
        )?;
        match self.uniqueness {
            Some(u) => write!(f, " uniqueness={u:.6}"),
            None => write!(f, " uniqueness=none"),
        }
    }
}

/// Decodes `n_dec` times from each of `n_z` draws z ~ N(0, I). A decode is
/// valid when its output string reparses into a valence-valid molecule.
pub fn evaluate_prior_validity(
    model: &Model,
    frags: &Fragments,
    n_z: usize,
    n_dec: usize,
    training: Option<&[MolGraph]>,
    opts: &EvalOptions,
) -> Result<PriorReport> {
    let seeds = item_seeds(opts.seed, n_z);
    let (lt, lg) = (model.dims.latent_tree, model.dims.latent_graph);
    let per_z = Workers::new(opts.jobs)?.map(&seeds, |_, &seed| {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let zt: Vec<f64> = (0..lt).map(|_| rng.sample(StandardNormal)).collect();
        let zg: Vec<f64> = (0..lg).map(|_| rng.sample(StandardNormal)).collect();
        (0..n_dec)
            .filter_map(|_| decode(model, frags, &zt, &zg, &opts.decode, &mut rng).ok())
            .map(|d| d.smiles)
            .filter(|s| is_valid_smiles(s))
            .collect::<Vec<_>>()
    });
    let samples: Vec<String> = per_z.into_iter().flatten().collect();
    let total = n_z * n_dec;
    let frac = |k: usize| {
        if total == 0 {
            0.0
        } else {
            k as f64 / total as f64
        }
    };
    let distinct: HashSet<&String> = samples.iter().collect();
    let uniqueness = training.map(|t| {
        let known: HashSet<String> = t.iter().map(write_canonical).collect();
        frac(samples.iter().filter(|s| !known.contains(*s)).count())
    });
    Ok(PriorReport {
        validity: frac(samples.len()),
        distinct: frac(distinct.len()),
        uniqueness,
        total,
        samples,
    })
}
