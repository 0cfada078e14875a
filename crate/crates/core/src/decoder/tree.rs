//! Depth-first tree generation and its teacher-forced loss.

use super::assembly::Skeleton;
use super::{
    label_logits, masked_argmax, masked_sample, topo_logit, DecodeMode, Fragments, TraceEvent,
};
use crate::encoder::{embed, gru, TreeGraph};
use crate::error::Result;
use crate::juncture::JunctionTree;
use crate::molgraph::MolGraph;
use crate::tensor::{sigmoid, Tape, Var};
use rand::Rng;
use std::collections::HashMap;

/// Labels a node may take as a new child of a cluster placed at `place`:
/// those with at least one attachment that keeps the skeleton in valence.
pub fn compatible_labels(
    skel: &Skeleton,
    host: &MolGraph,
    place: &[usize],
    frags: &Fragments,
) -> Vec<bool> {
    let extra = vec![0; host.num_atoms()];
    (0..frags.len())
        .map(|l| {
            super::attachment_options(host, frags.get(l))
                .iter()
                .any(|att| skel.fits(place, &extra, frags.get(l), att))
        })
        .collect()
}

/// A generated tree. Node ids follow creation order, which is depth-first
/// preorder; node 0 is the root.
#[derive(Debug, Clone)]
pub struct DecodedTree {
    pub labels: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// One valid realization, built while generating: every child attached
    /// at its first feasible position.
    pub witness: Skeleton,
    pub witness_place: Vec<Vec<usize>>,
    /// Directed messages computed, in order.
    pub traversed: Vec<(usize, usize)>,
    pub trace: Vec<TraceEvent>,
}

impl DecodedTree {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn tree_graph(&self) -> TreeGraph {
        let edges: Vec<(usize, usize)> = self
            .parent
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (p, i)))
            .collect();
        TreeGraph::new(self.labels.clone(), &edges, 0)
    }

    pub fn plan(&self) -> TreePlan {
        TreePlan {
            labels: self.labels.clone(),
            children: self.children.clone(),
            root: 0,
        }
    }
}

/// Decoder state at one step: the partial tree, the root-to-current path and
/// every message computed so far.
struct DecodeState {
    labels: Vec<usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    x: Vec<Var>,
    stack: Vec<usize>,
    messages: HashMap<(usize, usize), Var>,
    traversed: Vec<(usize, usize)>,
    step: usize,
}

impl DecodeState {
    fn new() -> DecodeState {
        DecodeState {
            labels: Vec::new(),
            parent: Vec::new(),
            children: Vec::new(),
            x: Vec::new(),
            stack: Vec::new(),
            messages: HashMap::new(),
            traversed: Vec::new(),
            step: 0,
        }
    }

    fn add_node(&mut self, tape: &mut Tape, label: usize, parent: Option<usize>) -> Result<usize> {
        let id = self.labels.len();
        self.labels.push(label);
        self.parent.push(parent);
        self.children.push(Vec::new());
        self.x.push(embed(tape, &[label])?[0]);
        if let Some(p) = parent {
            self.children[p].push(id);
        }
        Ok(id)
    }

    /// Messages `h_ki` for every neighbor k that has sent one, except `skip`.
    fn inward(&self, i: usize, skip: Option<usize>) -> Vec<Var> {
        self.parent[i]
            .iter()
            .chain(&self.children[i])
            .filter(|&&k| Some(k) != skip)
            .filter_map(|&k| self.messages.get(&(k, i)).copied())
            .collect()
    }

    fn send(&mut self, tape: &mut Tape, i: usize, j: usize) -> Result<Var> {
        let inc = self.inward(i, Some(j));
        let m = gru(tape, self.x[i], &inc)?;
        self.messages.insert((i, j), m);
        self.traversed.push((i, j));
        Ok(m)
    }
}

/// Generates a tree from `z_tree` (`1 × latent_tree`). Always returns at
/// least a root; halts after `max_nodes` nodes.
pub fn decode_tree<R: Rng>(
    tape: &mut Tape,
    frags: &Fragments,
    z_tree: Var,
    mode: DecodeMode,
    max_nodes: usize,
    rng: &mut R,
) -> Result<DecodedTree> {
    let mut st = DecodeState::new();
    let mut trace = Vec::new();
    let mut witness = Skeleton::new();
    let mut place: Vec<Vec<usize>> = Vec::new();

    let logits = label_logits(tape, z_tree, None)?;
    let all = vec![true; frags.len()];
    let root_label =
        choose(&tape.value(logits).data, &all, mode, rng).expect("vocabulary is non-empty");
    let root = st.add_node(tape, root_label, None)?;
    place.push(witness.place_fragment(frags.get(root_label)));
    trace.push(TraceEvent::Label {
        node: root,
        parent: None,
        label: root_label,
    });
    st.stack.push(root);

    while let Some(&i) = st.stack.last() {
        let inward = st.inward(i, None);
        let logit = topo_logit(tape, st.x[i], z_tree, &inward)?;
        let p = sigmoid(tape.scalar(logit));
        let want = match mode {
            DecodeMode::Greedy => p >= 0.5,
            DecodeMode::Sample => rng.random::<f64>() < p,
        };
        let room = st.labels.len() < max_nodes;
        let mask = if want && room {
            compatible_labels(&witness, frags.get(st.labels[i]), &place[i], frags)
        } else {
            Vec::new()
        };
        let allowed = mask.iter().filter(|&&m| m).count();
        let expand = want && room && allowed > 0;
        trace.push(TraceEvent::Topo {
            step: st.step,
            node: i,
            p,
            expand,
            allowed,
        });
        st.step += 1;
        if expand {
            let j = st.labels.len();
            let h = gru(tape, st.x[i], &inward)?;
            let logits = label_logits(tape, z_tree, Some(h))?;
            let label = choose(&tape.value(logits).data, &mask, mode, rng)
                .expect("mask has an allowed label");
            let id = st.add_node(tape, label, Some(i))?;
            debug_assert_eq!(id, j);
            st.messages.insert((i, j), h);
            st.traversed.push((i, j));
            let child = frags.get(label);
            let host = frags.get(st.labels[i]);
            let extra = vec![0; host.num_atoms()];
            let att = super::attachment_options(host, child)
                .into_iter()
                .find(|att| witness.fits(&place[i], &extra, child, att))
                .expect("label was compatible");
            let p_i = place[i].clone();
            place.push(witness.attach(child, &p_i, &att));
            trace.push(TraceEvent::Label {
                node: j,
                parent: Some(i),
                label,
            });
            st.stack.push(j);
        } else {
            st.stack.pop();
            if let Some(&p) = st.stack.last() {
                st.send(tape, i, p)?;
            }
        }
    }
    Ok(DecodedTree {
        labels: st.labels,
        parent: st.parent,
        children: st.children,
        witness,
        witness_place: place,
        traversed: st.traversed,
        trace,
    })
}

fn choose<R: Rng>(values: &[f64], mask: &[bool], mode: DecodeMode, rng: &mut R) -> Option<usize> {
    match mode {
        DecodeMode::Greedy => masked_argmax(values, mask),
        DecodeMode::Sample => masked_sample(values, mask, rng),
    }
}

/// A rooted tree with children in generation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreePlan {
    pub labels: Vec<usize>,
    pub children: Vec<Vec<usize>>,
    pub root: usize,
}

impl TreePlan {
    /// Children ordered by (label, first shared atom).
    pub fn from_junction(t: &JunctionTree, ids: &[usize]) -> TreePlan {
        let r = t.rooted();
        TreePlan {
            labels: ids.to_vec(),
            children: r.children,
            root: r.root,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Nodes in generation order.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![self.root];
        while let Some(x) = stack.pop() {
            out.push(x);
            stack.extend(self.children[x].iter().rev());
        }
        out
    }

    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut p = vec![None; self.len()];
        for (i, kids) in self.children.iter().enumerate() {
            for &c in kids {
                p[c] = Some(i);
            }
        }
        p
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeLoss {
    /// Sum of topological and label cross-entropies.
    pub loss: Var,
    pub topo_terms: usize,
    pub label_terms: usize,
    pub topo_correct: usize,
    pub label_correct: usize,
}

/// Teacher-forced cross-entropy of generating `plan` from `z_tree`: one
/// topological term per visit (a node with c children is visited c + 1
/// times) and one label term per node.
pub fn tree_loss(tape: &mut Tape, plan: &TreePlan, z_tree: Var) -> Result<TreeLoss> {
    let n = plan.len();
    let x = embed(tape, &plan.labels)?;
    let parents = plan.parents();
    let mut messages: HashMap<(usize, usize), Var> = HashMap::new();
    let inward =
        |messages: &HashMap<(usize, usize), Var>, i: usize, skip: Option<usize>| -> Vec<Var> {
            parents[i]
                .iter()
                .chain(&plan.children[i])
                .filter(|&&k| Some(k) != skip)
                .filter_map(|&k| messages.get(&(k, i)).copied())
                .collect()
        };
    let mut terms = Vec::with_capacity(3 * n);
    let (mut topo_terms, mut label_terms, mut topo_correct, mut label_correct) = (0, 1, 0, 0);

    let logits = label_logits(tape, z_tree, None)?;
    label_correct += usize::from(argmax(&tape.value(logits).data) == plan.labels[plan.root]);
    terms.push(tape.cross_entropy(logits, plan.labels[plan.root], None)?);

    let mut stack = vec![(plan.root, 0usize)];
    while let Some(&(i, next)) = stack.last() {
        let inc = inward(&messages, i, None);
        let logit = topo_logit(tape, x[i], z_tree, &inc)?;
        let target = next < plan.children[i].len();
        topo_terms += 1;
        topo_correct += usize::from((tape.scalar(logit) >= 0.0) == target);
        terms.push(tape.bce_with_logits(logit, if target { 1.0 } else { 0.0 }));
        if target {
            let j = plan.children[i][next];
            stack.last_mut().expect("non-empty").1 += 1;
            let h = gru(tape, x[i], &inc)?;
            messages.insert((i, j), h);
            let logits = label_logits(tape, z_tree, Some(h))?;
            label_terms += 1;
            label_correct += usize::from(argmax(&tape.value(logits).data) == plan.labels[j]);
            terms.push(tape.cross_entropy(logits, plan.labels[j], None)?);
            stack.push((j, 0));
        } else {
            stack.pop();
            if let Some(p) = parents[i] {
                let inc = inward(&messages, i, Some(p));
                let m = gru(tape, x[i], &inc)?;
                messages.insert((i, p), m);
            }
        }
    }
    Ok(TreeLoss {
        loss: tape.add_all(&terms)?.expect("at least one term"),
        topo_terms,
        label_terms,
        topo_correct,
        label_correct,
    })
}

fn argmax(values: &[f64]) -> usize {
    masked_argmax(values, &vec![true; values.len()]).unwrap_or(0)
}
