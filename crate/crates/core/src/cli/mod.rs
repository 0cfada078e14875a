//! Command-line surface. Every subcommand is deterministic given its
//! manifest; outputs go to `--out` and its `.manifest` sibling.

mod manifest;

pub use manifest::RunManifest;

use crate::decoder::{DecodeMode, Fragments};
use crate::error::Error;
use crate::juncture::{build_vocabulary, decompose, verify, Vocabulary};
use crate::latentopt::{report, results_csv, select, train_joint, trajectories, OptOptions};
use crate::molgraph::{write_canonical, MolGraph, PropertyFn, PropertyRegistry};
use crate::train::{
    evaluate_prior_validity, evaluate_reconstruction, load_checkpoint, read_corpus, train,
    EvalOptions, TrainConfig, Workers,
};
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;
pub const EXIT_OOV: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "jtvae",
    version,
    about = "Junction-tree VAE for molecular graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)] // parsed once per process
pub enum Command {
    /// Junction tree of every molecule, one per line.
    Decompose(DecomposeArgs),
    /// Cluster vocabulary of a corpus.
    Vocab(VocabArgs),
    /// Train a model and write its checkpoint.
    Train(TrainArgs),
    /// Decode molecules from prior samples.
    Sample(SampleArgs),
    /// Monte Carlo reconstruction accuracy.
    ReconstructEval(ReconstructArgs),
    /// Constrained property optimization in latent space.
    Optimize(OptimizeArgs),
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Check every tree; exit 3 on any violation.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Per-field overrides of the config file.
#[derive(Debug, Args, Default)]
pub struct ConfigFlags {
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub message_iterations: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub lr_decay: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub kl_weight: Option<f64>,
    #[arg(long)]
    pub kl_anneal_fraction: Option<f64>,
    #[arg(long)]
    pub property_name: Option<String>,
    #[arg(long)]
    pub property_weight: Option<f64>,
    #[arg(long)]
    pub max_nodes: Option<usize>,
    #[arg(long)]
    pub backtrack_budget: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigFlags {
    fn apply(&self, cfg: &mut TrainConfig) -> crate::Result<()> {
        let pairs: [(&str, Option<String>); 14] = [
            ("hidden_dim", self.hidden_dim.map(|v| v.to_string())),
            ("latent_dim", self.latent_dim.map(|v| v.to_string())),
            (
                "message_iterations",
                self.message_iterations.map(|v| v.to_string()),
            ),
            ("learning_rate", self.learning_rate.map(|v| v.to_string())),
            ("lr_decay", self.lr_decay.map(|v| v.to_string())),
            ("batch_size", self.batch_size.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("kl_weight", self.kl_weight.map(|v| v.to_string())),
            (
                "kl_anneal_fraction",
                self.kl_anneal_fraction.map(|v| v.to_string()),
            ),
            ("property", self.property_name.clone()),
            (
                "property_weight",
                self.property_weight.map(|v| v.to_string()),
            ),
            ("max_nodes", self.max_nodes.map(|v| v.to_string())),
            (
                "backtrack_budget",
                self.backtrack_budget.map(|v| v.to_string()),
            ),
            ("seed", self.seed.map(|v| v.to_string())),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        cfg.validate()
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// `key=value` file; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Jointly train the property predictor.
    #[arg(long)]
    pub property: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Print one metrics line per step.
    #[arg(long)]
    pub metrics: bool,
    #[command(flatten)]
    pub overrides: ConfigFlags,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Decodes per latent sample.
    #[arg(long, default_value_t = 1)]
    pub n_dec: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Decode greedily instead of sampling.
    #[arg(long)]
    pub greedy: bool,
    /// Training corpus, for the share of samples not in it.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub n_enc: usize,
    #[arg(long, default_value_t = 10)]
    pub n_dec: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample decodes instead of decoding greedily.
    #[arg(long)]
    pub sample_decode: bool,
    /// Optional report file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.4)]
    pub delta: f64,
    #[arg(long, default_value_t = 80)]
    pub steps: usize,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    /// Registered property; defaults to the one in the checkpoint config.
    #[arg(long)]
    pub property: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

/// A failed run and its exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Lib(Error),
    /// Violations found by `decompose --verify`.
    Violations(usize),
    Write(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Violations(_) => EXIT_INVARIANT,
            Failure::Write(_) => EXIT_INTERNAL,
            Failure::Lib(e) => match e.root() {
                Error::Syntax { .. }
                | Error::Valence { .. }
                | Error::UnsupportedFeature(_)
                | Error::InvalidGraph(_)
                | Error::Checkpoint(_)
                | Error::Config(_)
                | Error::Io(_)
                | Error::EmptyCorpus
                | Error::EmptyBatch => EXIT_INPUT,
                Error::Decomposition(_) | Error::GroundTruthNotInCandidates(_) => EXIT_INVARIANT,
                Error::OovCluster(_) => EXIT_OOV,
                _ => EXIT_INTERNAL,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Write(m) => f.write_str(m),
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::Violations(n) => write!(f, "{n} junction-tree violations"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Decompose(a) => run_decompose(&a),
        Command::Vocab(a) => run_vocab(&a),
        Command::Train(a) => run_train(&a),
        Command::Sample(a) => run_sample(&a),
        Command::ReconstructEval(a) => run_reconstruct(&a),
        Command::Optimize(a) => run_optimize(&a),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Lib(Error::Io(format!("{}: {e}", path.display()))))
}

fn read_text(path: &Path) -> Result<(String, Vec<u8>), Failure> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Failure::Lib(Error::Io(format!("{}: not UTF-8", path.display()))))?;
    Ok((text, bytes))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

/// Writes the output, then its manifest.
fn write_outputs(out: &Path, bytes: &[u8], manifest: &RunManifest) -> Outcome {
    let put = |p: &Path, b: &[u8]| {
        fs::write(p, b).map_err(|e| Failure::Write(format!("{}: {e}", p.display())))
    };
    put(out, bytes)?;
    put(&manifest_path(out), manifest.to_string().as_bytes())
}

fn load_corpus(path: &Path) -> Result<(Vec<MolGraph>, Vec<u8>), Failure> {
    let (text, bytes) = read_text(path)?;
    Ok((read_corpus(&text)?, bytes))
}

fn property_named(name: &str) -> Result<PropertyFn, Failure> {
    PropertyRegistry::default()
        .get(name)
        .ok_or_else(|| Failure::Usage(format!("unknown property `{name}`")))
}

fn run_decompose(a: &DecomposeArgs) -> Outcome {
    let (corpus, bytes) = load_corpus(&a.input)?;
    let rows = Workers::new(a.jobs)?.map(
        &corpus,
        |i, g| -> crate::Result<(String, usize, Vec<String>)> {
            let t = decompose(g).map_err(|e| e.at_line(i + 1))?;
            let violations = if a.verify { verify(&t, g) } else { Vec::new() };
            Ok((
                format!("{}\t{}\n", write_canonical(g), t.dump()),
                t.len(),
                violations,
            ))
        },
    );
    let mut out = String::new();
    let (mut clusters, mut bad) = (0, 0);
    for (i, row) in rows.into_iter().enumerate() {
        let (line, n, violations) = row?;
        out.push_str(&line);
        clusters += n;
        for v in &violations {
            eprintln!("molecule {}: {v}", i + 1);
        }
        bad += violations.len();
    }
    let mut m = RunManifest::new("decompose");
    m.input("in", &bytes).set("verify", a.verify);
    write_outputs(&a.out, out.as_bytes(), &m)?;
    println!(
        "molecules={} clusters={clusters} violations={bad}",
        corpus.len()
    );
    if bad > 0 {
        return Err(Failure::Violations(bad));
    }
    Ok(())
}

fn run_vocab(a: &VocabArgs) -> Outcome {
    let (corpus, bytes) = load_corpus(&a.input)?;
    let vocab = build_vocabulary(&corpus)?;
    let mut m = RunManifest::new("vocab");
    m.input("in", &bytes);
    write_outputs(&a.out, vocab.to_text().as_bytes(), &m)?;
    println!("labels={}", vocab.len());
    Ok(())
}

fn run_train(a: &TrainArgs) -> Outcome {
    let (corpus, corpus_bytes) = load_corpus(&a.input)?;
    let (vocab_text, vocab_bytes) = read_text(&a.vocab)?;
    let vocab = Vocabulary::parse(&vocab_text)?;
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::parse(&read_text(p)?.0)?,
        None => TrainConfig::default(),
    };
    a.overrides.apply(&mut cfg)?;
    let log = |s: &crate::train::StepMetrics| {
        if a.metrics {
            println!("{s}");
        }
    };
    let outcome = if a.property {
        let f = property_named(&cfg.property)?;
        train_joint(&corpus, vocab, &cfg, f, a.jobs, log)?
    } else {
        train(&corpus, vocab, &cfg, a.jobs, log)?
    };
    let mut m = RunManifest::new("train");
    m.input("in", &corpus_bytes)
        .input("vocab", &vocab_bytes)
        .set("seed", outcome.config.seed)
        .set("property", a.property)
        .config(&outcome.config.to_text());
    write_outputs(&a.out, &outcome.checkpoint(), &m)?;
    if let Some(last) = outcome.metrics.last() {
        println!("final {last}");
    }
    Ok(())
}

fn run_sample(a: &SampleArgs) -> Outcome {
    let ckpt = read(&a.ckpt)?;
    let (model, cfg) = load_checkpoint(&ckpt)?;
    let frags = Fragments::new(&model.vocab)?;
    let training = match &a.train {
        Some(p) => Some(load_corpus(p)?.0),
        None => None,
    };
    let mut decode = cfg.decode_options();
    decode.mode = if a.greedy {
        DecodeMode::Greedy
    } else {
        DecodeMode::Sample
    };
    let opts = EvalOptions {
        decode,
        seed: a.seed,
        jobs: a.jobs,
    };
    let r = evaluate_prior_validity(&model, &frags, a.n, a.n_dec, training.as_deref(), &opts)?;
    let mut text = r.samples.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    let mut m = RunManifest::new("sample");
    m.input("ckpt", &ckpt)
        .set("seed", a.seed)
        .set("n", a.n)
        .set("n_dec", a.n_dec)
        .set("greedy", a.greedy);
    if let Some(p) = &a.train {
        m.input("train", &read(p)?);
    }
    write_outputs(&a.out, text.as_bytes(), &m)?;
    println!("{r}");
    Ok(())
}

fn run_reconstruct(a: &ReconstructArgs) -> Outcome {
    let ckpt = read(&a.ckpt)?;
    let (model, cfg) = load_checkpoint(&ckpt)?;
    let frags = Fragments::new(&model.vocab)?;
    let (corpus, bytes) = load_corpus(&a.input)?;
    let mut decode = cfg.decode_options();
    if a.sample_decode {
        decode.mode = DecodeMode::Sample;
    }
    let opts = EvalOptions {
        decode,
        seed: a.seed,
        jobs: a.jobs,
    };
    let acc = evaluate_reconstruction(&model, &frags, &corpus, a.n_enc, a.n_dec, &opts)?;
    let line = format!(
        "molecules={} n_enc={} n_dec={} reconstruction_accuracy={acc:.6}\n",
        corpus.len(),
        a.n_enc,
        a.n_dec
    );
    print!("{line}");
    if let Some(out) = &a.out {
        let mut m = RunManifest::new("reconstruct-eval");
        m.input("ckpt", &ckpt)
            .input("in", &bytes)
            .set("seed", a.seed)
            .set("n_enc", a.n_enc)
            .set("n_dec", a.n_dec)
            .set("sample_decode", a.sample_decode);
        write_outputs(out, line.as_bytes(), &m)?;
    }
    Ok(())
}

fn run_optimize(a: &OptimizeArgs) -> Outcome {
    let ckpt = read(&a.ckpt)?;
    let (model, cfg) = load_checkpoint(&ckpt)?;
    let frags = Fragments::new(&model.vocab)?;
    let (mols, bytes) = load_corpus(&a.input)?;
    let name = a.property.clone().unwrap_or(cfg.property.clone());
    let property = property_named(&name)?;
    let opts = OptOptions {
        delta: a.delta,
        steps: a.steps,
        alpha: a.alpha,
        decode: cfg.decode_options(),
    };
    let trajs = trajectories(&model, &frags, &mols, property, &opts, a.jobs)?;
    let results: Vec<_> = trajs.iter().map(|t| select(t, a.delta)).collect();
    let summary = report(&results)?;
    let mut m = RunManifest::new("optimize");
    m.input("ckpt", &ckpt)
        .input("in", &bytes)
        .set("delta", a.delta)
        .set("steps", a.steps)
        .set("alpha", a.alpha)
        .set("property", &name);
    write_outputs(&a.out, results_csv(&results).as_bytes(), &m)?;
    println!("{summary}");
    Ok(())
}
