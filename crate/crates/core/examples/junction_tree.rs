//! Decomposes molecules into junction trees, verifies them and prints the
//! cluster vocabulary they induce.
//!
//! cargo run --example junction_tree -- 'CC1CC2CCC1C2' 'Cc1ccc2ccccc2c1'

use jtvae::juncture::{build_vocabulary, decompose, verify};
use jtvae::molgraph::parse_smiles;

fn main() -> jtvae::Result<()> {
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() {
        args = ["CC1CC2CCC1C2", "Cc1ccc2ccccc2c1", "CC(C)(C)c1ccccc1"]
            .map(String::from)
            .to_vec();
    }
    let mols = args
        .iter()
        .map(|s| parse_smiles(s))
        .collect::<jtvae::Result<Vec<_>>>()?;
    for (s, g) in args.iter().zip(&mols) {
        let t = decompose(g)?;
        let violations = verify(&t, g);
        println!("{s}\t{}\tviolations={}", t.dump(), violations.len());
    }
    let vocab = build_vocabulary(&mols)?;
    for (id, label) in vocab.labels().iter().enumerate() {
        println!("{id}\t{label}");
    }
    Ok(())
}
