//! Parses SMILES, writes canonical strings and compares Morgan fingerprints.
//!
//! cargo run --example molecules -- 'OCC' 'CCO' 'c1ccccc1O'

use jtvae::molgraph::{desk_property, morgan_fingerprint, parse_smiles, tanimoto, write_canonical};

fn main() -> jtvae::Result<()> {
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() {
        args = ["OCC", "CCO", "c1ccccc1O", "C[N+](=O)[O-]"]
            .map(String::from)
            .to_vec();
    }
    let mols = args
        .iter()
        .map(|s| parse_smiles(s))
        .collect::<jtvae::Result<Vec<_>>>()?;
    for (s, g) in args.iter().zip(&mols) {
        println!(
            "{s} -> {} atoms={} bonds={} property={:.3}",
            write_canonical(g),
            g.num_atoms(),
            g.num_bonds(),
            desk_property(g)
        );
    }
    let fps: Vec<_> = mols.iter().map(|g| morgan_fingerprint(g, 2)).collect();
    for i in 0..fps.len() {
        for j in i + 1..fps.len() {
            println!(
                "similarity {} {} = {:.3}",
                args[i],
                args[j],
                tanimoto(&fps[i], &fps[j])
            );
        }
    }
    Ok(())
}
