//! Parameter layout shared by the encoder, decoder and property head.

use crate::encoder::{ATOM_FDIM, BOND_FDIM};
use crate::error::{Error, Result};
use crate::juncture::Vocabulary;
use crate::tensor::{read_checkpoint, write_checkpoint, CheckpointData, ParamStore};
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub hidden: usize,
    pub latent_tree: usize,
    pub latent_graph: usize,
    /// Message-passing iterations for the graph encoder and assembly scorer.
    pub depth: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            hidden: 450,
            latent_tree: 28,
            latent_graph: 28,
            depth: 3,
        }
    }
}

impl ModelDims {
    pub fn latent(&self) -> usize {
        self.latent_tree + self.latent_graph
    }
}

/// A vocabulary plus every learned parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub dims: ModelDims,
    pub vocab: Vocabulary,
    pub params: ParamStore,
}

/// Every parameter as (name, rows, cols, fan_in), in initialization order.
pub fn param_shapes(d: &ModelDims, vocab_size: usize) -> Vec<(&'static str, usize, usize, usize)> {
    let (h, lt, lg, l, v) = (
        d.hidden,
        d.latent_tree,
        d.latent_graph,
        d.latent(),
        vocab_size,
    );
    vec![
        // graph encoder
        ("W1g", h, ATOM_FDIM, ATOM_FDIM),
        ("W2g", h, BOND_FDIM, BOND_FDIM),
        ("W3g", h, h, h),
        ("U1g", h, ATOM_FDIM, ATOM_FDIM),
        ("U2g", h, h, h),
        // cluster embedding and tree GRU
        ("emb", v, h, h),
        ("Wz", h, h, h),
        ("Uz", h, h, h),
        ("bz", 1, h, h),
        ("Wr", h, h, h),
        ("Ur", h, h, h),
        ("br", 1, h, h),
        ("W", h, h, h),
        ("U", h, h, h),
        ("Wo", h, h, h),
        ("Uo", h, h, h),
        // variational heads
        ("Wmu_T", lt, h, h),
        ("bmu_T", 1, lt, h),
        ("Wlv_T", lt, h, h),
        ("blv_T", 1, lt, h),
        ("Wmu_G", lg, h, h),
        ("bmu_G", 1, lg, h),
        ("Wlv_G", lg, h, h),
        ("blv_G", 1, lg, h),
        // topological head
        ("Wd1", h, h, h),
        ("Wd2", h, lt, lt),
        ("Wd3", h, h, h),
        ("ud", 1, h, h),
        // label head
        ("Wl1", h, lt, lt),
        ("Wl2", h, h, h),
        ("Ul", v, h, h),
        // assembly scorer
        ("Wa1", h, ATOM_FDIM, ATOM_FDIM),
        ("Wa2", h, BOND_FDIM, BOND_FDIM),
        ("Wa3", h, h, h),
        ("Ua1", lg, ATOM_FDIM, ATOM_FDIM),
        ("Ua2", lg, h, h),
        // property head
        ("Wp1", h, l, l),
        ("bp1", 1, h, l),
        ("Wp2", 1, h, h),
        ("bp2", 1, 1, h),
    ]
}

impl Model {
    /// Fresh model with uniform ±1/√fan_in initialization from `seed`.
    pub fn new(dims: ModelDims, vocab: Vocabulary, seed: u64) -> Model {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (name, rows, cols, fan_in) in param_shapes(&dims, vocab.len()) {
            params.add_uniform(name, rows, cols, fan_in, &mut rng);
        }
        Model {
            dims,
            vocab,
            params,
        }
    }

    pub fn to_checkpoint(&self, config: &str) -> Vec<u8> {
        write_checkpoint(&CheckpointData {
            config: config.to_string(),
            vocab: self.vocab.to_text(),
            tensors: self
                .params
                .params()
                .iter()
                .map(|p| (p.name.clone(), p.value.clone()))
                .collect(),
        })
    }

    /// Rebuilds a model from checkpoint bytes; returns it with the embedded
    /// config text.
    pub fn from_checkpoint(bytes: &[u8], dims: ModelDims) -> Result<Model> {
        let data = read_checkpoint(bytes)?;
        Model::from_data(&data, dims)
    }

    pub fn from_data(data: &CheckpointData, dims: ModelDims) -> Result<Model> {
        let vocab = Vocabulary::parse(&data.vocab)?;
        let shapes = param_shapes(&dims, vocab.len());
        if shapes.len() != data.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                shapes.len(),
                data.tensors.len()
            )));
        }
        let mut params = ParamStore::new();
        for ((name, rows, cols, _), (tname, t)) in shapes.iter().zip(&data.tensors) {
            if name != tname || t.shape() != (*rows, *cols) {
                return Err(Error::Checkpoint(format!(
                    "tensor {tname} {}x{} does not match {name} {rows}x{cols}",
                    t.rows, t.cols
                )));
            }
            params.add(name, t.clone());
        }
        Ok(Model {
            dims,
            vocab,
            params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelDims {
        ModelDims {
            hidden: 6,
            latent_tree: 3,
            latent_graph: 2,
            depth: 2,
        }
    }

    #[test]
    fn same_seed_same_parameters() {
        let v = Vocabulary::from_labels(["CC", "CO"]);
        let a = Model::new(small(), v.clone(), 7);
        let b = Model::new(small(), v.clone(), 7);
        let c = Model::new(small(), v, 8);
        assert_eq!(a, b);
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn init_within_fan_in_bound() {
        let m = Model::new(small(), Vocabulary::from_labels(["CC"]), 1);
        let w = m.params.value(m.params.id("W3g").unwrap());
        let bound = 1.0 / (6f64).sqrt();
        assert!(w.data.iter().all(|x| x.abs() <= bound));
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = Model::new(small(), Vocabulary::from_labels(["CC", "CO"]), 3);
        let bytes = m.to_checkpoint("hidden_dim=6\n");
        let back = Model::from_checkpoint(&bytes, small()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_checkpoint("hidden_dim=6\n"), bytes);
        let wrong = ModelDims {
            hidden: 7,
            ..small()
        };
        assert!(Model::from_checkpoint(&bytes, wrong).is_err());
    }
}
