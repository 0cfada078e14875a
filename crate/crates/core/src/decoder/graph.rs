//! Candidate scoring, greedy assembly with bounded backtracking, and the
//! teacher-forced assembly likelihood.

use super::assembly::{
    enumerate_candidates, enumerate_capped, placed_neighborhood_graph, Candidate, Neighborhood,
    NeighborhoodGraph, Placed, Skeleton,
};
use super::tree::{decode_tree, DecodedTree, TreePlan};
use super::{masked_argmax, DecodeMode, DecodeOptions, Fragments, TraceEvent, CANDIDATE_CAP};
use crate::encoder::{encode_tree, message_passing, GraphInputs, Phase, ASSEMBLY_NAMES};
use crate::error::{Error, Result};
use crate::juncture::{cluster_fragment, JunctionTree};
use crate::model::Model;
use crate::molgraph::{write_canonical, MolGraph};
use crate::tensor::{Tape, Tensor, Var};
use rand::Rng;
use std::collections::HashMap;

/// Message-passing inputs for one candidate, plus the tree edge
/// `(α_u, α_v)` of every directed bond that crosses clusters.
#[derive(Debug, Clone)]
pub struct ScoringInput {
    pub inputs: GraphInputs,
    pub cross: Vec<Option<(usize, usize)>>,
}

impl ScoringInput {
    pub fn new(graph: &MolGraph, alpha: &[usize]) -> ScoringInput {
        let inputs = GraphInputs::new(graph);
        let cross = inputs
            .edges
            .iter()
            .map(|&(u, v)| (alpha[u] != alpha[v]).then_some((alpha[u], alpha[v])))
            .collect();
        ScoringInput { inputs, cross }
    }

    pub fn from_graph(g: &NeighborhoodGraph) -> ScoringInput {
        ScoringInput::new(&g.graph, &g.alpha)
    }
}

/// `h_G · z_G`, where `h_G` averages atom states from the assembly network
/// and every cross-cluster bond u→v also receives the tree message
/// `m̂_{α_u α_v}`.
pub fn score_candidate(
    tape: &mut Tape,
    inp: &ScoringInput,
    tree_messages: &HashMap<(usize, usize), Var>,
    z_graph: Var,
    depth: usize,
) -> Result<Var> {
    let extra = if inp.cross.iter().any(Option::is_some) {
        let mut hidden = 0;
        let mut rows = Vec::with_capacity(inp.cross.len());
        for c in &inp.cross {
            if let Some(e) = c {
                let m = *tree_messages.get(e).ok_or_else(|| {
                    Error::InvalidGraph(format!("no tree message {} -> {}", e.0, e.1))
                })?;
                hidden = tape.shape(m).1;
                rows.push(Some(m));
            } else {
                rows.push(None);
            }
        }
        let zero = tape.zeros(1, hidden);
        let rows: Vec<Var> = rows.into_iter().map(|r| r.unwrap_or(zero)).collect();
        Some(tape.concat_rows(&rows)?)
    } else {
        None
    };
    let h = message_passing(tape, &inp.inputs, depth, &ASSEMBLY_NAMES, extra)?;
    let hg = tape.mean_rows(h);
    tape.dot(hg, z_graph)
}

#[derive(Debug, Clone)]
pub struct AssemblyResult {
    pub molecule: MolGraph,
    /// Per tree node: index of the chosen candidate in enumeration order.
    pub choices: Vec<usize>,
    /// Per tree node: number of distinct candidates.
    pub set_sizes: Vec<usize>,
    pub retries: usize,
    pub trace: Vec<TraceEvent>,
}

struct Frame {
    node: usize,
    candidates: Vec<Candidate>,
    order: Vec<usize>,
    next: usize,
    skel: Skeleton,
    place: Vec<Option<Vec<usize>>>,
}

/// Assembles a decoded tree one neighborhood at a time in generation order.
/// A neighborhood with no valid candidate sends the search back to the most
/// recent node with an untried candidate; at most `budget` such retries.
#[allow(clippy::too_many_arguments)]
pub fn assemble<R: Rng>(
    tape: &mut Tape,
    frags: &Fragments,
    tree: &DecodedTree,
    z_graph: Var,
    depth: usize,
    mode: DecodeMode,
    budget: usize,
    rng: &mut R,
) -> Result<AssemblyResult> {
    let n = tree.len();
    let enc = encode_tree(tape, &tree.tree_graph(), Phase::Both)?;
    let frag = |i: usize| frags.get(tree.labels[i]);
    let internal: Vec<usize> = (0..n).filter(|&i| !tree.children[i].is_empty()).collect();

    let mut skel = Skeleton::new();
    let mut place: Vec<Option<Vec<usize>>> = vec![None; n];
    place[0] = Some(skel.place_fragment(frag(0)));
    let mut frames: Vec<Frame> = Vec::new();
    let mut choices = vec![0; n];
    let mut set_sizes = vec![1; n];
    let mut retries = 0;
    let mut trace = Vec::new();

    let placed = |place: &[Option<Vec<usize>>], i: usize| Placed {
        node: i,
        frag: frag(i).clone(),
        place: place[i]
            .clone()
            .expect("nodes are placed before their neighborhoods"),
    };
    let commit =
        |skel: &mut Skeleton, place: &mut Vec<Option<Vec<usize>>>, i: usize, c: &Candidate| {
            let host = place[i].clone().expect("placed");
            for (k, &child) in tree.children[i].iter().enumerate() {
                place[child] = Some(skel.attach(frag(child), &host, &c.attachments[k]));
            }
        };

    while frames.len() < internal.len() {
        let i = internal[frames.len()];
        let nb = Neighborhood {
            center: placed(&place, i),
            parent: tree.parent[i].map(|p| placed(&place, p)),
            children: tree.children[i]
                .iter()
                .map(|&c| (c, frag(c).clone()))
                .collect(),
        };
        match enumerate_capped(&skel, &nb, CANDIDATE_CAP) {
            Ok(candidates) => {
                let order = rank(tape, &candidates, &enc.messages, z_graph, depth, mode, rng)?;
                let frame = Frame {
                    node: i,
                    order,
                    next: 1,
                    skel: skel.clone(),
                    place: place.clone(),
                    candidates,
                };
                let pick = frame.order[0];
                commit(&mut skel, &mut place, i, &frame.candidates[pick]);
                choices[i] = pick;
                set_sizes[i] = frame.candidates.len();
                trace.push(TraceEvent::Assemble {
                    node: i,
                    candidates: frame.candidates.len(),
                    chosen: pick,
                });
                frames.push(frame);
            }
            Err(Error::EmptyCandidates(_)) => {
                trace.push(TraceEvent::Backtrack { node: i });
                loop {
                    let Some(f) = frames.last_mut() else {
                        return Err(Error::AssemblyFailed(i));
                    };
                    if f.next < f.order.len() {
                        if retries == budget {
                            return Err(Error::AssemblyFailed(i));
                        }
                        retries += 1;
                        skel = f.skel.clone();
                        place = f.place.clone();
                        let pick = f.order[f.next];
                        f.next += 1;
                        commit(&mut skel, &mut place, f.node, &f.candidates[pick]);
                        choices[f.node] = pick;
                        trace.push(TraceEvent::Assemble {
                            node: f.node,
                            candidates: f.candidates.len(),
                            chosen: pick,
                        });
                        break;
                    }
                    frames.pop();
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(AssemblyResult {
        molecule: skel.to_molecule()?,
        choices,
        set_sizes,
        retries,
        trace,
    })
}

/// Candidate indices best first. Greedy ranks by score; sampling perturbs
/// scores with Gumbel noise, which draws an order without replacement from
/// softmax(scores). Ties keep enumeration order.
fn rank<R: Rng>(
    tape: &mut Tape,
    candidates: &[Candidate],
    messages: &HashMap<(usize, usize), Var>,
    z_graph: Var,
    depth: usize,
    mode: DecodeMode,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if candidates.len() == 1 {
        return Ok(vec![0]);
    }
    let mut keys = Vec::with_capacity(candidates.len());
    for c in candidates {
        let s = score_candidate(
            tape,
            &ScoringInput::from_graph(&c.merged),
            messages,
            z_graph,
            depth,
        )?;
        let mut k = tape.scalar(s);
        if mode == DecodeMode::Sample {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            k -= (-u.ln()).ln();
        }
        keys.push(k);
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    Ok(order)
}

#[derive(Debug, Clone)]
pub struct Decoded {
    pub tree: DecodedTree,
    pub molecule: MolGraph,
    pub smiles: String,
    pub assembly: Option<AssemblyResult>,
    /// Why the tree's witness realization was used instead of assembly.
    pub fallback: Option<String>,
}

impl Decoded {
    /// Tree and assembly events, one per line.
    pub fn trace_lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self.tree.trace.iter().map(ToString::to_string).collect();
        if let Some(a) = &self.assembly {
            out.extend(a.trace.iter().map(ToString::to_string));
        }
        if let Some(reason) = &self.fallback {
            out.push(
                TraceEvent::Fallback {
                    reason: reason.clone(),
                }
                .to_string(),
            );
        }
        out
    }
}

/// Decodes a molecule from latent halves. When assembly fails, the witness
/// built during tree generation is returned instead, so the result is
/// always valid.
pub fn decode<R: Rng>(
    model: &Model,
    frags: &Fragments,
    z_tree: &[f64],
    z_graph: &[f64],
    opts: &DecodeOptions,
    rng: &mut R,
) -> Result<Decoded> {
    let mut tape = Tape::new(&model.params);
    let zt = tape.input(Tensor::row(z_tree.to_vec()));
    let zg = tape.input(Tensor::row(z_graph.to_vec()));
    let tree = decode_tree(&mut tape, frags, zt, opts.mode, opts.max_nodes, rng)?;
    let (molecule, assembly, fallback) = match assemble(
        &mut tape,
        frags,
        &tree,
        zg,
        model.dims.depth,
        opts.mode,
        opts.backtrack_budget,
        rng,
    ) {
        Ok(a) => (a.molecule.clone(), Some(a), None),
        Err(e) => (tree.witness.to_molecule()?, None, Some(e.to_string())),
    };
    Ok(Decoded {
        smiles: write_canonical(&molecule),
        tree,
        molecule,
        assembly,
        fallback,
    })
}

/// One neighborhood of a known molecule, replayed in generation order: the
/// skeleton placed so far, the neighborhood, and its true merged graph.
#[derive(Debug, Clone)]
pub struct TeacherStep {
    pub skeleton: Skeleton,
    pub neighborhood: Neighborhood,
    pub truth: NeighborhoodGraph,
}

/// Replays the assembly of `g` along its junction tree. Children are given
/// as vocabulary fragments, as during decoding.
pub fn teacher_steps(
    g: &MolGraph,
    t: &JunctionTree,
    ids: &[usize],
    frags: &Fragments,
) -> Vec<TeacherStep> {
    let plan = TreePlan::from_junction(t, ids);
    let parents = plan.parents();
    let placed = |i: usize| Placed {
        node: i,
        frag: cluster_fragment(g, &t.nodes[i].atoms),
        place: t.nodes[i].atoms.clone(),
    };
    let mut skel = Skeleton::with_atoms(g.atoms());
    let root = placed(plan.root);
    skel.add_fragment_bonds(&root.frag, &root.place);
    let mut steps = Vec::new();
    for i in plan.preorder() {
        if plan.children[i].is_empty() {
            continue;
        }
        let kids: Vec<Placed> = plan.children[i].iter().map(|&c| placed(c)).collect();
        let nb = Neighborhood {
            center: placed(i),
            parent: parents[i].map(placed),
            children: plan.children[i]
                .iter()
                .map(|&c| (c, frags.get(ids[c]).clone()))
                .collect(),
        };
        let truth = placed_neighborhood_graph(&nb, &kids);
        steps.push(TeacherStep {
            skeleton: skel.clone(),
            neighborhood: nb,
            truth,
        });
        for k in &kids {
            skel.add_fragment_bonds(&k.frag, &k.place);
        }
    }
    steps
}

/// The candidates of one neighborhood with more than one choice, and the
/// index of the true one.
#[derive(Debug, Clone)]
pub struct NodeTarget {
    pub node: usize,
    pub candidates: Vec<ScoringInput>,
    pub truth: usize,
}

/// Candidate sets for every neighborhood of `g` with more than one
/// candidate; singletons contribute nothing to the assembly loss.
pub fn teacher_targets(
    g: &MolGraph,
    t: &JunctionTree,
    ids: &[usize],
    frags: &Fragments,
) -> Result<Vec<NodeTarget>> {
    let mut out = Vec::new();
    for step in teacher_steps(g, t, ids, frags) {
        let node = step.neighborhood.center.node;
        let candidates =
            enumerate_candidates(&step.skeleton, &step.neighborhood).map_err(|e| match e {
                Error::EmptyCandidates(n) => Error::GroundTruthNotInCandidates(n),
                other => other,
            })?;
        let truth = candidates
            .iter()
            .position(|c| c.merged.key == step.truth.key)
            .ok_or(Error::GroundTruthNotInCandidates(node))?;
        if candidates.len() > 1 {
            out.push(NodeTarget {
                node,
                candidates: candidates
                    .iter()
                    .map(|c| ScoringInput::from_graph(&c.merged))
                    .collect(),
                truth,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct GraphLoss {
    /// `Σ_i [f(G_i) − log Σ_{G'} exp f(G')]`, at most zero.
    pub log_likelihood: Var,
    pub nodes: usize,
    /// Nodes whose true candidate scores highest.
    pub correct: usize,
}

pub fn graph_loss(
    tape: &mut Tape,
    targets: &[NodeTarget],
    tree_messages: &HashMap<(usize, usize), Var>,
    z_graph: Var,
    depth: usize,
) -> Result<GraphLoss> {
    let mut terms = Vec::with_capacity(targets.len());
    let mut correct = 0;
    for t in targets {
        let scores = t
            .candidates
            .iter()
            .map(|c| score_candidate(tape, c, tree_messages, z_graph, depth))
            .collect::<Result<Vec<_>>>()?;
        let row = tape.concat_cols(&scores)?;
        let values = &tape.value(row).data;
        correct += usize::from(masked_argmax(values, &vec![true; values.len()]) == Some(t.truth));
        let lse = tape.logsumexp(row, None)?;
        let picked = tape.element(row, t.truth)?;
        terms.push(tape.sub(picked, lse)?);
    }
    let log_likelihood = match tape.add_all(&terms)? {
        Some(v) => v,
        None => tape.input(Tensor::scalar(0.0)),
    };
    Ok(GraphLoss {
        log_likelihood,
        nodes: targets.len(),
        correct,
    })
}
