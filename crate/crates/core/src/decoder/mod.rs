//! Autoregressive tree decoding with feasibility masking, and neighborhood
//! graph assembly.

mod assembly;
mod graph;
mod tree;

pub use assembly::{
    attachment_options, enumerate_candidates, enumerate_capped, placed_neighborhood_graph,
    Attachment, Candidate, Neighborhood, NeighborhoodGraph, Placed, Skeleton,
};
pub use graph::{
    assemble, decode, graph_loss, score_candidate, teacher_steps, teacher_targets, AssemblyResult,
    Decoded, GraphLoss, NodeTarget, ScoringInput, TeacherStep,
};
pub use tree::{compatible_labels, decode_tree, tree_loss, DecodedTree, TreeLoss, TreePlan};

use crate::error::Result;
use crate::juncture::Vocabulary;
use crate::molgraph::{parse_fragment, MolGraph};
use crate::tensor::{Tape, Var};
use rand::Rng;
use std::fmt;

/// Nodes a decoded tree may hold.
pub const DEFAULT_MAX_NODES: usize = 60;
/// Alternative-candidate retries allowed during one assembly.
pub const DEFAULT_BACKTRACK_BUDGET: usize = 20;
/// Partial merges kept per child while enumerating candidates during
/// decoding.
pub const CANDIDATE_CAP: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    /// Expand when p ≥ 0.5, take the best label and candidate.
    Greedy,
    /// Draw expansions, labels and candidate orders from the model.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOptions {
    pub mode: DecodeMode,
    pub max_nodes: usize,
    pub backtrack_budget: usize,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            mode: DecodeMode::Greedy,
            max_nodes: DEFAULT_MAX_NODES,
            backtrack_budget: DEFAULT_BACKTRACK_BUDGET,
        }
    }
}

impl DecodeOptions {
    pub fn sample() -> Self {
        DecodeOptions {
            mode: DecodeMode::Sample,
            ..Default::default()
        }
    }
}

/// Parsed cluster graph for every vocabulary label.
#[derive(Debug, Clone)]
pub struct Fragments {
    graphs: Vec<MolGraph>,
}

impl Fragments {
    pub fn new(vocab: &Vocabulary) -> Result<Fragments> {
        let graphs = vocab
            .labels()
            .iter()
            .map(|l| parse_fragment(l))
            .collect::<Result<_>>()?;
        Ok(Fragments { graphs })
    }

    pub fn get(&self, id: usize) -> &MolGraph {
        &self.graphs[id]
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}

/// Logit of "node i has another child":
/// `u · τ(W1 x_i + W2 z + W3 Σ_k h_ki)`.
pub fn topo_logit(tape: &mut Tape, x: Var, z_tree: Var, inward: &[Var]) -> Result<Var> {
    let w1 = tape.p("Wd1");
    let w2 = tape.p("Wd2");
    let a = tape.linear(x, w1)?;
    let b = tape.linear(z_tree, w2)?;
    let mut pre = tape.add(a, b)?;
    if !inward.is_empty() {
        let w3 = tape.p("Wd3");
        let stacked = tape.concat_rows(inward)?;
        let s = tape.sum_rows(stacked);
        let c = tape.linear(s, w3)?;
        pre = tape.add(pre, c)?;
    }
    let hidden = tape.relu(pre);
    let u = tape.p("ud");
    tape.dot(u, hidden)
}

/// Label logits `U τ(W1 z + W2 h_ij)` over the vocabulary; a root has no
/// incoming message.
pub fn label_logits(tape: &mut Tape, z_tree: Var, h: Option<Var>) -> Result<Var> {
    let w1 = tape.p("Wl1");
    let mut pre = tape.linear(z_tree, w1)?;
    if let Some(h) = h {
        let w2 = tape.p("Wl2");
        let b = tape.linear(h, w2)?;
        pre = tape.add(pre, b)?;
    }
    let hidden = tape.relu(pre);
    let u = tape.p("Ul");
    tape.linear(hidden, u)
}

/// Index of the largest allowed entry; ties go to the lowest index.
pub(crate) fn masked_argmax(values: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (&v, &ok)) in values.iter().zip(mask).enumerate() {
        if ok && best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Draw from softmax(values) restricted to `mask`.
pub(crate) fn masked_sample<R: Rng>(values: &[f64], mask: &[bool], rng: &mut R) -> Option<usize> {
    let top = masked_argmax(values, mask)?;
    let weights: Vec<f64> = values
        .iter()
        .zip(mask)
        .map(|(&v, &ok)| if ok { (v - values[top]).exp() } else { 0.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            if u < *w {
                return Some(i);
            }
            u -= w;
        }
    }
    Some(top)
}

/// One line of a decode trace.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Topo {
        step: usize,
        node: usize,
        p: f64,
        expand: bool,
        allowed: usize,
    },
    Label {
        node: usize,
        parent: Option<usize>,
        label: usize,
    },
    Assemble {
        node: usize,
        candidates: usize,
        chosen: usize,
    },
    Backtrack {
        node: usize,
    },
    Fallback {
        reason: String,
    },
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::Topo {
                step,
                node,
                p,
                expand,
                allowed,
            } => write!(
                f,
                "event=topo step={step} node={node} p={p:.6} expand={} allowed={allowed}",
                u8::from(*expand)
            ),
            TraceEvent::Label {
                node,
                parent,
                label,
            } => match parent {
                Some(p) => write!(f, "event=label node={node} parent={p} label={label}"),
                None => write!(f, "event=label node={node} parent=none label={label}"),
            },
            TraceEvent::Assemble {
                node,
                candidates,
                chosen,
            } => {
                write!(
                    f,
                    "event=assemble node={node} candidates={candidates} chosen={chosen}"
                )
            }
            TraceEvent::Backtrack { node } => write!(f, "event=backtrack node={node}"),
            TraceEvent::Fallback { reason } => write!(f, "event=fallback reason={reason:?}"),
        }
    }
}
