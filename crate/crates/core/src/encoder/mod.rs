//! Graph and tree encoders with Gaussian variational heads.
//!
//! Atom features (20): element one-hot (9) | degree 0..=4 one-hot (5) |
//! charge −2..=2 one-hot (5) | aromatic bit.
//! Bond features (5): order one-hot (single, double, triple, aromatic) |
//! in-ring bit.

mod graph;
mod tree;

pub use graph::{encode_graph, encode_graph_inputs, GraphInputs};
pub(crate) use graph::{message_passing, ASSEMBLY_NAMES};
pub use tree::{embed, encode_tree, gru, node_state, Phase, TreeEncoding, TreeGraph};

use crate::error::Result;
use crate::molgraph::MolGraph;
use crate::tensor::{Tape, Tensor, Var};
use rand::Rng;
use rand_distr::StandardNormal;

pub const ATOM_FDIM: usize = 20;
pub const BOND_FDIM: usize = 5;

/// Log-variance outputs are clamped into this range.
pub const LOGVAR_RANGE: (f64, f64) = (-10.0, 10.0);

pub fn atom_features(g: &MolGraph, i: usize) -> [f64; ATOM_FDIM] {
    let a = g.atom(i);
    let mut f = [0.0; ATOM_FDIM];
    f[a.element.index()] = 1.0;
    f[9 + g.degree(i).min(4)] = 1.0;
    f[14 + (a.charge.clamp(-2, 2) + 2) as usize] = 1.0;
    if a.aromatic {
        f[19] = 1.0;
    }
    f
}

pub fn bond_features(g: &MolGraph, bond: usize, ring: &[bool]) -> [f64; BOND_FDIM] {
    let mut f = [0.0; BOND_FDIM];
    f[g.bonds()[bond].order.index()] = 1.0;
    if ring[bond] {
        f[4] = 1.0;
    }
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Tree,
    Graph,
}

/// (μ, log σ²) from two affine layers; log σ² is clamped.
pub fn variational_head(tape: &mut Tape, h: Var, part: Part) -> Result<(Var, Var)> {
    let (wm, bm, wl, bl) = match part {
        Part::Tree => ("Wmu_T", "bmu_T", "Wlv_T", "blv_T"),
        Part::Graph => ("Wmu_G", "bmu_G", "Wlv_G", "blv_G"),
    };
    let (wm, bm, wl, bl) = (tape.p(wm), tape.p(bm), tape.p(wl), tape.p(bl));
    let mu = tape.affine(h, wm, bm)?;
    let lv = tape.affine(h, wl, bl)?;
    let lv = tape.clamp(lv, LOGVAR_RANGE.0, LOGVAR_RANGE.1);
    Ok((mu, lv))
}

/// `z = μ + exp(lv/2) ⊙ ε`; with no rng, `z = μ`.
pub fn reparameterize<R: Rng>(
    tape: &mut Tape,
    mu: Var,
    lv: Var,
    rng: Option<&mut R>,
) -> Result<Var> {
    let Some(rng) = rng else {
        return Ok(mu);
    };
    let (r, c) = tape.shape(mu);
    let eps: Vec<f64> = (0..r * c).map(|_| rng.sample(StandardNormal)).collect();
    let eps = tape.input(Tensor::from_vec(r, c, eps)?);
    let half = tape.scale(lv, 0.5);
    let sd = tape.exp(half);
    let noise = tape.mul(sd, eps)?;
    tape.add(mu, noise)
}

/// `½ Σ (exp(lv) + μ² − 1 − lv)`.
pub fn kl_divergence(tape: &mut Tape, mu: Var, lv: Var) -> Result<Var> {
    let e = tape.exp(lv);
    let m2 = tape.square(mu);
    let s = tape.add(e, m2)?;
    let s = tape.sub(s, lv)?;
    let s = tape.affine_scalar(s, 0.5, -0.5);
    Ok(tape.sum_all(s))
}

#[cfg(test)]
mod tests;
