//! Loopy message passing over atoms and bonds.

use super::{atom_features, bond_features, ATOM_FDIM, BOND_FDIM};
use crate::error::Result;
use crate::molgraph::MolGraph;
use crate::tensor::{Tape, Tensor, Var};

/// Feature matrices and index lists for one molecule. Directed edge `2b` runs
/// `bonds[b].a → bonds[b].b`, edge `2b + 1` the reverse.
#[derive(Debug, Clone)]
pub struct GraphInputs {
    pub num_atoms: usize,
    /// (source, target) per directed edge.
    pub edges: Vec<(usize, usize)>,
    pub atom_x: Tensor,
    /// Features of each directed edge's source atom.
    pub edge_src_x: Tensor,
    pub edge_x: Tensor,
    /// Per directed edge u→v: edges w→u with w ≠ v.
    pub precursors: Vec<Vec<usize>>,
    /// Per atom: incoming directed edges.
    pub incoming: Vec<Vec<usize>>,
}

impl GraphInputs {
    pub fn new(g: &MolGraph) -> GraphInputs {
        let n = g.num_atoms();
        let ring = g.ring_bonds();
        let mut edges = Vec::with_capacity(2 * g.num_bonds());
        for b in g.bonds() {
            edges.push((b.a, b.b));
            edges.push((b.b, b.a));
        }
        let mut incoming = vec![Vec::new(); n];
        for (e, &(_, v)) in edges.iter().enumerate() {
            incoming[v].push(e);
        }
        let precursors = edges
            .iter()
            .map(|&(u, v)| {
                incoming[u]
                    .iter()
                    .copied()
                    .filter(|&e| edges[e].0 != v)
                    .collect()
            })
            .collect();
        let mut atom_x = Vec::with_capacity(n * ATOM_FDIM);
        for i in 0..n {
            atom_x.extend(atom_features(g, i));
        }
        let mut edge_src_x = Vec::with_capacity(edges.len() * ATOM_FDIM);
        let mut edge_x = Vec::with_capacity(edges.len() * BOND_FDIM);
        for (e, &(u, _)) in edges.iter().enumerate() {
            edge_src_x.extend(atom_features(g, u));
            edge_x.extend(bond_features(g, e / 2, &ring));
        }
        GraphInputs {
            num_atoms: n,
            atom_x: Tensor::from_vec(n, ATOM_FDIM, atom_x).expect("sized"),
            edge_src_x: Tensor::from_vec(edges.len(), ATOM_FDIM, edge_src_x).expect("sized"),
            edge_x: Tensor::from_vec(edges.len(), BOND_FDIM, edge_x).expect("sized"),
            edges,
            precursors,
            incoming,
        }
    }
}

/// Parameter names for one message-passing network.
pub(crate) struct MpnNames {
    pub w1: &'static str,
    pub w2: &'static str,
    pub w3: &'static str,
    pub u1: &'static str,
    pub u2: &'static str,
}

pub(crate) const GRAPH_NAMES: MpnNames = MpnNames {
    w1: "W1g",
    w2: "W2g",
    w3: "W3g",
    u1: "U1g",
    u2: "U2g",
};

pub(crate) const ASSEMBLY_NAMES: MpnNames = MpnNames {
    w1: "Wa1",
    w2: "Wa2",
    w3: "Wa3",
    u1: "Ua1",
    u2: "Ua2",
};

/// Runs `depth` synchronous rounds and returns per-atom states
/// `τ(U1 x_u + U2 Σ_v ν_vu)`. `extra`, when given, is a `2|E| × H` matrix
/// added inside the W3 term of every round.
pub(crate) fn message_passing(
    tape: &mut Tape,
    inp: &GraphInputs,
    depth: usize,
    names: &MpnNames,
    extra: Option<Var>,
) -> Result<Var> {
    let u1 = tape.p(names.u1);
    let u2 = tape.p(names.u2);
    let ax = tape.input(inp.atom_x.clone());
    let self_term = tape.linear(ax, u1)?;
    if inp.edges.is_empty() {
        return Ok(tape.relu(self_term));
    }
    let w1 = tape.p(names.w1);
    let w2 = tape.p(names.w2);
    let w3 = tape.p(names.w3);
    let sx = tape.input(inp.edge_src_x.clone());
    let ex = tape.input(inp.edge_x.clone());
    let a = tape.linear(sx, w1)?;
    let b = tape.linear(ex, w2)?;
    let mut base = tape.add(a, b)?;
    if let Some(extra) = extra {
        let inj = tape.linear(extra, w3)?;
        base = tape.add(base, inj)?;
    }
    // ν⁽⁰⁾ = 0, so the first round is τ(base)
    let mut nu = tape.relu(base);
    for _ in 1..depth {
        let s = tape.gather_sum(nu, inp.precursors.clone())?;
        let m = tape.linear(s, w3)?;
        let pre = tape.add(base, m)?;
        nu = tape.relu(pre);
    }
    let agg = tape.gather_sum(nu, inp.incoming.clone())?;
    let nb = tape.linear(agg, u2)?;
    let pre = tape.add(self_term, nb)?;
    Ok(tape.relu(pre))
}

/// Per-atom states (`n × H`) and their mean `h_G` (`1 × H`).
pub fn encode_graph(tape: &mut Tape, g: &MolGraph, depth: usize) -> Result<(Var, Var)> {
    let inp = GraphInputs::new(g);
    encode_graph_inputs(tape, &inp, depth)
}

pub fn encode_graph_inputs(tape: &mut Tape, inp: &GraphInputs, depth: usize) -> Result<(Var, Var)> {
    let h = message_passing(tape, inp, depth, &GRAPH_NAMES, None)?;
    let hg = tape.mean_rows(h);
    Ok((h, hg))
}
