//! Property prediction from the latent space and constrained gradient
//! ascent on it.

use crate::decoder::{decode, DecodeMode, DecodeOptions, Fragments};
use crate::error::{Error, Result};
use crate::juncture::Vocabulary;
use crate::model::Model;
use crate::molgraph::{morgan_fingerprint, tanimoto, write_canonical, MolGraph, PropertyFn};
use crate::tensor::{Tape, Tensor, Var};
use crate::train::{
    encode_molecule, train_with_property, StepMetrics, TrainConfig, TrainOutcome, Workers,
};
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use std::fmt;

/// Morgan radius used by the similarity constraint.
pub const SIMILARITY_RADIUS: usize = 2;

/// `F(z) = Wp2 · tanh(Wp1 z + bp1) + bp2` for a `1 × latent` row z.
pub fn property_head(tape: &mut Tape, z: Var) -> Result<Var> {
    let w1 = tape.p("Wp1");
    let b1 = tape.p("bp1");
    let w2 = tape.p("Wp2");
    let b2 = tape.p("bp2");
    let pre = tape.affine(z, w1, b1)?;
    let hidden = tape.tanh(pre);
    let out = tape.dot(w2, hidden)?;
    tape.add(out, b2)
}

/// F(z) and ∂F/∂z.
pub fn property_gradient(model: &Model, z: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new(&model.params);
    let zv = tape.input(Tensor::row(z.to_vec()));
    let f = property_head(&mut tape, zv)?;
    let grads = tape.backward(f)?;
    let g = grads
        .wrt(zv)
        .map(|t| t.data.clone())
        .unwrap_or_else(|| vec![0.0; z.len()]);
    Ok((tape.scalar(f), g))
}

pub fn predict_property(model: &Model, z: &[f64]) -> Result<f64> {
    let mut tape = Tape::new(&model.params);
    let zv = tape.input(Tensor::row(z.to_vec()));
    let f = property_head(&mut tape, zv)?;
    Ok(tape.scalar(f))
}

/// VAE training plus squared-error regression of `property` from the mean
/// encoding. A zero `property_weight` in `cfg` is raised to 1.
pub fn train_joint(
    corpus: &[MolGraph],
    vocab: Vocabulary,
    cfg: &TrainConfig,
    property: PropertyFn,
    jobs: usize,
    on_step: impl FnMut(&StepMetrics),
) -> Result<TrainOutcome> {
    let mut cfg = cfg.clone();
    if cfg.property_weight == 0.0 {
        cfg.property_weight = 1.0;
    }
    train_with_property(corpus, vocab, &cfg, property, jobs, on_step)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptOptions {
    /// Minimum Tanimoto similarity to the input.
    pub delta: f64,
    pub steps: usize,
    pub alpha: f64,
    pub decode: DecodeOptions,
}

impl Default for OptOptions {
    fn default() -> Self {
        OptOptions {
            delta: 0.4,
            steps: 80,
            alpha: 2.0,
            decode: DecodeOptions::default(),
        }
    }
}

/// One decoded trajectory point.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub step: usize,
    /// F at this point of the ascent.
    pub predicted: f64,
    pub smiles: String,
    pub property: f64,
    pub similarity: f64,
}

/// The ascent from one molecule's mean encoding, with every decode that
/// succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub original: String,
    pub property: f64,
    /// F at the start point.
    pub start: f64,
    /// F after the last step.
    pub end: f64,
    pub points: Vec<Point>,
}

/// Starts at z⁰ = μ and takes `steps` steps `z ← z + α ∂F/∂z`, decoding
/// each point greedily. Failed decodes are skipped.
pub fn trajectory(
    model: &Model,
    frags: &Fragments,
    m: &MolGraph,
    property: PropertyFn,
    opts: &OptOptions,
) -> Result<Trajectory> {
    let enc = encode_molecule(model, m)?;
    let lt = model.dims.latent_tree;
    let dec = DecodeOptions {
        mode: DecodeMode::Greedy,
        ..opts.decode
    };
    let fp = morgan_fingerprint(m, SIMILARITY_RADIUS);
    let mut z = enc.mean();
    let start = predict_property(model, &z)?;
    let mut points = Vec::with_capacity(opts.steps);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(0);
    for step in 1..=opts.steps {
        let (_, g) = property_gradient(model, &z)?;
        for (x, d) in z.iter_mut().zip(&g) {
            *x += opts.alpha * d;
        }
        let predicted = predict_property(model, &z)?;
        let Ok(d) = decode(model, frags, &z[..lt], &z[lt..], &dec, &mut rng) else {
            continue;
        };
        points.push(Point {
            step,
            predicted,
            property: property(&d.molecule),
            similarity: tanimoto(&fp, &morgan_fingerprint(&d.molecule, SIMILARITY_RADIUS)),
            smiles: d.smiles,
        });
    }
    Ok(Trajectory {
        original: write_canonical(m),
        property: property(m),
        start,
        end: predict_property(model, &z)?,
        points,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub original: String,
    pub best: Option<String>,
    /// y(m′) − y(m).
    pub improvement: Option<f64>,
    pub similarity: Option<f64>,
    pub success: bool,
}

/// Among decodes distinct from the input with similarity ≥ δ, the one at
/// the highest predicted F; ties go to the earliest step.
pub fn select(t: &Trajectory, delta: f64) -> OptResult {
    let mut best: Option<&Point> = None;
    for p in &t.points {
        if p.smiles != t.original
            && p.similarity >= delta
            && best.is_none_or(|b| p.predicted > b.predicted)
        {
            best = Some(p);
        }
    }
    OptResult {
        original: t.original.clone(),
        best: best.map(|p| p.smiles.clone()),
        improvement: best.map(|p| p.property - t.property),
        similarity: best.map(|p| p.similarity),
        success: best.is_some(),
    }
}

pub fn optimize(
    model: &Model,
    frags: &Fragments,
    m: &MolGraph,
    property: PropertyFn,
    opts: &OptOptions,
) -> Result<OptResult> {
    Ok(select(
        &trajectory(model, frags, m, property, opts)?,
        opts.delta,
    ))
}

/// Trajectories for a batch of molecules; errors name the 1-based position.
pub fn trajectories(
    model: &Model,
    frags: &Fragments,
    mols: &[MolGraph],
    property: PropertyFn,
    opts: &OptOptions,
    jobs: usize,
) -> Result<Vec<Trajectory>> {
    Workers::new(jobs)?
        .map(mols, |i, m| {
            trajectory(model, frags, m, property, opts).map_err(|e| e.at_line(i + 1))
        })
        .into_iter()
        .collect()
}

/// Batch statistics; means are over successes only and absent without any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_improvement: Option<f64>,
    pub mean_similarity: Option<f64>,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.6}"));
        write!(
            f,
            "count={} successes={} success_rate={:.6} mean_improvement={} mean_similarity={}",
            self.count,
            self.successes,
            self.success_rate,
            opt(self.mean_improvement),
            opt(self.mean_similarity)
        )
    }
}

pub fn report(results: &[OptResult]) -> Result<Summary> {
    if results.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let ok: Vec<&OptResult> = results.iter().filter(|r| r.success).collect();
    let mean = |f: fn(&OptResult) -> Option<f64>| {
        (!ok.is_empty()).then(|| ok.iter().filter_map(|r| f(r)).sum::<f64>() / ok.len() as f64)
    };
    Ok(Summary {
        count: results.len(),
        successes: ok.len(),
        success_rate: ok.len() as f64 / results.len() as f64,
        mean_improvement: mean(|r| r.improvement),
        mean_similarity: mean(|r| r.similarity),
    })
}

/// One line per molecule: `input,output,improvement,similarity,success`,
/// with empty fields where there is no result.
pub fn results_csv(results: &[OptResult]) -> String {
    let mut out = String::from("input,output,improvement,similarity,success\n");
    for r in results {
        let num = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.original,
            r.best.as_deref().unwrap_or(""),
            num(r.improvement),
            num(r.similarity),
            u8::from(r.success)
        ));
    }
    out
}
