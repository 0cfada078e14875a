//! Tree GRU message passing over junction trees.

use crate::error::Result;
use crate::juncture::JunctionTree;
use crate::tensor::{Tape, Var};
use std::collections::HashMap;

/// Label ids and undirected edges of a cluster tree, independent of atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeGraph {
    pub labels: Vec<usize>,
    pub adjacency: Vec<Vec<usize>>,
    pub root: usize,
}

impl TreeGraph {
    pub fn new(labels: Vec<usize>, edges: &[(usize, usize)], root: usize) -> TreeGraph {
        let mut adjacency = vec![Vec::new(); labels.len()];
        for &(a, b) in edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        adjacency.iter_mut().for_each(|a| a.sort_unstable());
        TreeGraph {
            labels,
            adjacency,
            root,
        }
    }

    pub fn from_junction(t: &JunctionTree, ids: &[usize]) -> TreeGraph {
        TreeGraph::new(ids.to_vec(), &t.edges, t.root)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// (parent, post-order) of the tree hung from the root.
    fn orient(&self) -> (Vec<Option<usize>>, Vec<usize>) {
        let n = self.labels.len();
        let mut parent = vec![None; n];
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        let mut stack = vec![self.root];
        seen[self.root] = true;
        while let Some(x) = stack.pop() {
            order.push(x);
            for &y in &self.adjacency[x] {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = Some(x);
                    stack.push(y);
                }
            }
        }
        order.reverse();
        (parent, order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    BottomUp,
    Both,
}

#[derive(Debug, Clone)]
pub struct TreeEncoding {
    pub h_root: Var,
    /// Node states; `None` where not all inward messages exist (non-root
    /// nodes in the bottom-up phase).
    pub h_nodes: Vec<Option<Var>>,
    /// Directed message `m_ij` by (i, j).
    pub messages: HashMap<(usize, usize), Var>,
    /// Directed edges in the order their messages were computed.
    pub schedule: Vec<(usize, usize)>,
}

/// `m_ij = GRU(x_i, {m_ki})`, with `x` the `1 × H` embedding of node i.
pub fn gru(tape: &mut Tape, x: Var, incoming: &[Var]) -> Result<Var> {
    let hidden = tape.shape(x).1;
    let wz = tape.p("Wz");
    let uz = tape.p("Uz");
    let bz = tape.p("bz");
    let wr = tape.p("Wr");
    let ur = tape.p("Ur");
    let br = tape.p("br");
    let w = tape.p("W");
    let u = tape.p("U");

    let (s, gated) = if incoming.is_empty() {
        let zero = tape.zeros(1, hidden);
        (zero, zero)
    } else {
        let stacked = tape.concat_rows(incoming)?;
        let s = tape.sum_rows(stacked);
        let wrx = tape.affine(x, wr, br)?;
        let urm = tape.linear(stacked, ur)?;
        let pre = tape.add_row(urm, wrx)?;
        let r = tape.sigmoid(pre);
        let rm = tape.mul(r, stacked)?;
        (s, tape.sum_rows(rm))
    };
    let wzx = tape.affine(x, wz, bz)?;
    let uzs = tape.linear(s, uz)?;
    let zpre = tape.add(wzx, uzs)?;
    let z = tape.sigmoid(zpre);
    let wx = tape.linear(x, w)?;
    let ug = tape.linear(gated, u)?;
    let cpre = tape.add(wx, ug)?;
    let cand = tape.tanh(cpre);
    let keep = tape.one_minus(z);
    let a = tape.mul(keep, s)?;
    let b = tape.mul(z, cand)?;
    tape.add(a, b)
}

/// `τ(Wo x_i + Σ_k Uo m_ki)`.
pub fn node_state(tape: &mut Tape, x: Var, incoming: &[Var]) -> Result<Var> {
    let wo = tape.p("Wo");
    let mut pre = tape.linear(x, wo)?;
    if !incoming.is_empty() {
        let uo = tape.p("Uo");
        let stacked = tape.concat_rows(incoming)?;
        let s = tape.sum_rows(stacked);
        let t = tape.linear(s, uo)?;
        pre = tape.add(pre, t)?;
    }
    Ok(tape.relu(pre))
}

/// Embedding rows for every node label.
pub fn embed(tape: &mut Tape, labels: &[usize]) -> Result<Vec<Var>> {
    let emb = tape.p("emb");
    labels
        .iter()
        .map(|&l| tape.gather_rows(emb, &[l]))
        .collect()
}

pub fn encode_tree(tape: &mut Tape, t: &TreeGraph, phase: Phase) -> Result<TreeEncoding> {
    let x = embed(tape, &t.labels)?;
    let (parent, postorder) = t.orient();
    let mut messages: HashMap<(usize, usize), Var> = HashMap::new();
    let mut schedule = Vec::new();

    let inward =
        |messages: &HashMap<(usize, usize), Var>, i: usize, except: Option<usize>| -> Vec<Var> {
            t.adjacency[i]
                .iter()
                .filter(|&&k| Some(k) != except)
                .filter_map(|&k| messages.get(&(k, i)).copied())
                .collect()
        };

    for &i in &postorder {
        if let Some(p) = parent[i] {
            let inc = inward(&messages, i, Some(p));
            let m = gru(tape, x[i], &inc)?;
            messages.insert((i, p), m);
            schedule.push((i, p));
        }
    }
    if phase == Phase::Both {
        for &i in postorder.iter().rev() {
            for &c in &t.adjacency[i] {
                if parent[c] == Some(i) {
                    let inc = inward(&messages, i, Some(c));
                    let m = gru(tape, x[i], &inc)?;
                    messages.insert((i, c), m);
                    schedule.push((i, c));
                }
            }
        }
    }

    let mut h_nodes = vec![None; t.len()];
    for i in 0..t.len() {
        if i == t.root || phase == Phase::Both {
            let inc = inward(&messages, i, None);
            h_nodes[i] = Some(node_state(tape, x[i], &inc)?);
        }
    }
    Ok(TreeEncoding {
        h_root: h_nodes[t.root].expect("root state always computed"),
        h_nodes,
        messages,
        schedule,
    })
}
