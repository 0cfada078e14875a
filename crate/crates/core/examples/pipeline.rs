//! The command-line pipeline end to end in a temporary directory: vocab,
//! train, sample, reconstruction and optimization, each writing a manifest.

use std::path::Path;

const TOY: &str = include_str!("../data/toy20.smi");

fn run(args: &[&str]) {
    println!("$ jtvae {}", args.join(" "));
    let code = jtvae::cli::main_with(std::iter::once("jtvae").chain(args.iter().copied()));
    assert_eq!(code, 0, "exit code {code}");
}

fn main() -> std::io::Result<()> {
    let dir = tempfile::tempdir()?;
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    std::fs::write(dir.path().join("toy.smi"), TOY)?;
    run(&[
        "decompose",
        "--in",
        &p("toy.smi"),
        "--out",
        &p("trees.tsv"),
        "--verify",
    ]);
    run(&["vocab", "--in", &p("toy.smi"), "--out", &p("vocab.txt")]);
    run(&[
        "train",
        "--in",
        &p("toy.smi"),
        "--vocab",
        &p("vocab.txt"),
        "--out",
        &p("toy.ckpt"),
        "--hidden-dim",
        "64",
        "--latent-dim",
        "16",
        "--epochs",
        "150",
        "--learning-rate",
        "0.005",
        "--lr-decay",
        "0.99",
        "--batch-size",
        "4",
        "--kl-weight",
        "0.005",
        "--seed",
        "1",
        "--property",
        "--jobs",
        "4",
    ]);
    run(&[
        "sample",
        "--ckpt",
        &p("toy.ckpt"),
        "--n",
        "20",
        "--seed",
        "3",
        "--out",
        &p("samples.smi"),
    ]);
    run(&[
        "reconstruct-eval",
        "--ckpt",
        &p("toy.ckpt"),
        "--in",
        &p("toy.smi"),
        "--n-enc",
        "2",
        "--n-dec",
        "2",
    ]);
    run(&[
        "optimize",
        "--ckpt",
        &p("toy.ckpt"),
        "--in",
        &p("toy.smi"),
        "--delta",
        "0.2",
        "--out",
        &p("opt.csv"),
    ]);
    show(&dir.path().join("toy.ckpt.manifest"))?;
    show(&dir.path().join("opt.csv"))
}

fn show(path: &Path) -> std::io::Result<()> {
    println!(
        "--- {}",
        path.file_name().unwrap_or_default().to_string_lossy()
    );
    print!("{}", std::fs::read_to_string(path)?);
    Ok(())
}
