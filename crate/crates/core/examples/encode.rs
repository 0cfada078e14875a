//! Encodes molecules into the tree and graph halves of the latent space
//! with a freshly initialized model.

use jtvae::juncture::build_vocabulary;
use jtvae::model::{Model, ModelDims};
use jtvae::molgraph::parse_smiles;
use jtvae::train::encode_molecule;

fn main() -> jtvae::Result<()> {
    let smiles = ["CCO", "c1ccccc1C(=O)O", "C1CC2CCC1C2"];
    let mols = smiles
        .iter()
        .map(|s| parse_smiles(s))
        .collect::<jtvae::Result<Vec<_>>>()?;
    let dims = ModelDims {
        hidden: 32,
        latent_tree: 4,
        latent_graph: 4,
        depth: 3,
    };
    let model = Model::new(dims, build_vocabulary(&mols)?, 7);
    for (s, g) in smiles.iter().zip(&mols) {
        let e = encode_molecule(&model, g)?;
        println!("{s}");
        println!("  mu_tree  {:.4?}", e.mu_tree);
        println!("  mu_graph {:.4?}", e.mu_graph);
    }
    Ok(())
}
