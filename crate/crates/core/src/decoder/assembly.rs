//! Neighborhood candidate enumeration over a partially assembled molecule.
//!
//! A child cluster attaches to its host either at one atom (matching element
//! and charge) or, when both clusters have at least three atoms, at one bond
//! (matching orders and endpoints). Candidates are merged when their
//! neighborhood graphs are isomorphic under a coloring that pins every parent
//! atom, gives the center cluster one color and each child its own color.

use crate::error::{Error, Result};
use crate::molgraph::{max_valence, write_canonical_colored, Atom, Bond, BondOrder, MolGraph};
use std::collections::{BTreeMap, HashMap, HashSet};

/// Shared atoms between a child cluster and its host, as
/// (child-local atom, host-local atom) pairs; one pair or one bond's two.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Attachment {
    pub pairs: Vec<(usize, usize)>,
}

/// Every structurally compatible way to attach `child` to `host`, ignoring
/// valence. Atom attachments come first, in (host atom, child atom) order,
/// then bond attachments in (host bond, child bond, orientation) order. Two
/// single-atom clusters never attach: the child would add nothing.
pub fn attachment_options(host: &MolGraph, child: &MolGraph) -> Vec<Attachment> {
    if host.num_atoms() == 1 && child.num_atoms() == 1 {
        return Vec::new();
    }
    let same = |x: usize, a: usize| {
        let (cx, ha) = (child.atom(x), host.atom(a));
        cx.element == ha.element && cx.charge == ha.charge
    };
    let mut out = Vec::new();
    for a in 0..host.num_atoms() {
        for x in 0..child.num_atoms() {
            if same(x, a) {
                out.push(Attachment {
                    pairs: vec![(x, a)],
                });
            }
        }
    }
    if host.num_atoms() >= 3 && child.num_atoms() >= 3 {
        for hb in host.bonds() {
            for cb in child.bonds() {
                if hb.order != cb.order {
                    continue;
                }
                for (x, y) in [(cb.a, cb.b), (cb.b, cb.a)] {
                    if same(x, hb.a) && same(y, hb.b) {
                        out.push(Attachment {
                            pairs: vec![(x, hb.a), (y, hb.b)],
                        });
                    }
                }
            }
        }
    }
    out
}

/// Half-units a child adds at each attached host atom; the shared bond of a
/// bond attachment is already present.
fn added_half_units<'a>(
    child: &'a MolGraph,
    att: &'a Attachment,
) -> impl Iterator<Item = (usize, u32)> + 'a {
    let attached: Vec<usize> = att.pairs.iter().map(|&(x, _)| x).collect();
    att.pairs.iter().map(move |&(x, a)| {
        let add = child
            .neighbors(x)
            .iter()
            .filter(|(y, _)| !attached.contains(y))
            .map(|&(_, bi)| child.bonds()[bi].order.half_units())
            .sum();
        (a, add)
    })
}

fn capacity(a: &Atom) -> u32 {
    2 * max_valence(a.element, a.charge) + 1
}

/// Atoms and bonds of a molecule under construction. Aromatic flags merge by
/// OR; bonds are keyed by their sorted endpoints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Skeleton {
    atoms: Vec<Atom>,
    bonds: BTreeMap<(usize, usize), BondOrder>,
    half: Vec<u32>,
    /// Atoms that are a single-atom cluster. Distinct single-atom clusters
    /// are distinct atoms, so each atom carries at most one.
    claimed: Vec<bool>,
}

impl Skeleton {
    pub fn new() -> Skeleton {
        Skeleton::default()
    }

    /// Unbonded copies of `atoms`, for replaying a known molecule.
    pub fn with_atoms(atoms: &[Atom]) -> Skeleton {
        Skeleton {
            atoms: atoms.to_vec(),
            bonds: BTreeMap::new(),
            half: vec![0; atoms.len()],
            claimed: vec![false; atoms.len()],
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn bonds(&self) -> impl Iterator<Item = (usize, usize, BondOrder)> + '_ {
        self.bonds.iter().map(|(&(a, b), &o)| (a, b, o))
    }

    pub fn bond(&self, a: usize, b: usize) -> Option<BondOrder> {
        self.bonds.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn half_units(&self, i: usize) -> u32 {
        self.half[i]
    }

    pub fn is_claimed(&self, i: usize) -> bool {
        self.claimed[i]
    }

    /// Half-units still available at atom `i`.
    pub fn headroom(&self, i: usize) -> u32 {
        capacity(&self.atoms[i]).saturating_sub(self.half[i])
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.half.push(0);
        self.claimed.push(false);
        self.atoms.len() - 1
    }

    /// Adds a bond unless the pair is already bonded.
    pub fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) {
        let key = (a.min(b), a.max(b));
        if self.bonds.contains_key(&key) {
            return;
        }
        self.bonds.insert(key, order);
        self.half[a] += order.half_units();
        self.half[b] += order.half_units();
    }

    fn merge_flag(&mut self, i: usize, aromatic: bool) {
        self.atoms[i].aromatic |= aromatic;
    }

    /// Adds `place[k]`-indexed bonds of `frag`; a single-atom fragment
    /// claims its atom.
    pub fn add_fragment_bonds(&mut self, frag: &MolGraph, place: &[usize]) {
        if frag.num_atoms() == 1 {
            self.claimed[place[0]] = true;
        }
        for b in frag.bonds() {
            self.add_bond(place[b.a], place[b.b], b.order);
        }
    }

    /// Places a fragment as fresh atoms; returns its placement.
    pub fn place_fragment(&mut self, frag: &MolGraph) -> Vec<usize> {
        let place: Vec<usize> = frag.atoms().iter().map(|&a| self.add_atom(a)).collect();
        self.add_fragment_bonds(frag, &place);
        place
    }

    /// Places `child` attached to a host placed at `host_place`.
    pub fn attach(
        &mut self,
        child: &MolGraph,
        host_place: &[usize],
        att: &Attachment,
    ) -> Vec<usize> {
        let mut place = Vec::with_capacity(child.num_atoms());
        for (x, &atom) in child.atoms().iter().enumerate() {
            match att.pairs.iter().find(|&&(cx, _)| cx == x) {
                Some(&(_, a)) => {
                    let g = host_place[a];
                    self.merge_flag(g, atom.aromatic);
                    place.push(g);
                }
                None => place.push(self.add_atom(atom)),
            }
        }
        self.add_fragment_bonds(child, &place);
        place
    }

    /// True if `att` keeps every host atom within valence, given `extra`
    /// half-units already promised at each host-local atom, and a
    /// single-atom child lands on an unclaimed atom.
    pub fn fits(
        &self,
        host_place: &[usize],
        extra: &[u32],
        child: &MolGraph,
        att: &Attachment,
    ) -> bool {
        if child.num_atoms() == 1 && self.claimed[host_place[att.pairs[0].1]] {
            return false;
        }
        added_half_units(child, att).all(|(a, add)| extra[a] + add <= self.headroom(host_place[a]))
    }

    /// Validated molecule. Aromatic bonds off every aromatic cycle become
    /// single and atoms without aromatic bonds lose the flag; both only lower
    /// valence.
    pub fn to_molecule(&self) -> Result<MolGraph> {
        let mut bonds: Vec<Bond> = self.bonds().map(|(a, b, o)| Bond::new(a, b, o)).collect();
        let aromatic_only: Vec<Bond> = bonds
            .iter()
            .filter(|b| b.order == BondOrder::Aromatic)
            .copied()
            .collect();
        let ring = MolGraph::from_parts_unchecked(self.atoms.clone(), aromatic_only.clone())?;
        let bridge = ring.bridges();
        let mut k = 0;
        for b in bonds.iter_mut() {
            if b.order == BondOrder::Aromatic {
                if bridge[k] {
                    b.order = BondOrder::Single;
                }
                k += 1;
            }
        }
        let mut atoms = self.atoms.clone();
        for (i, a) in atoms.iter_mut().enumerate() {
            a.aromatic = bonds
                .iter()
                .any(|b| b.order == BondOrder::Aromatic && (b.a == i || b.b == i));
        }
        MolGraph::new(atoms, bonds)
    }
}

/// A cluster with its atoms placed in a skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct Placed {
    pub node: usize,
    pub frag: MolGraph,
    pub place: Vec<usize>,
}

/// A tree node's cluster, its placed parent, and its unplaced children in
/// tree order.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    pub center: Placed,
    pub parent: Option<Placed>,
    pub children: Vec<(usize, MolGraph)>,
}

/// A merged neighborhood: graph, tree node of every atom, coloring and its
/// colored canonical string.
#[derive(Debug, Clone)]
pub struct NeighborhoodGraph {
    pub graph: MolGraph,
    pub alpha: Vec<usize>,
    pub colors: Vec<u32>,
    pub key: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Placed(usize),
    New(usize, usize),
}

struct Builder {
    index: HashMap<Key, usize>,
    atoms: Vec<Atom>,
    alpha: Vec<usize>,
    colors: Vec<u32>,
    bonds: Vec<Bond>,
    bonded: HashSet<(usize, usize)>,
}

impl Builder {
    fn new() -> Builder {
        Builder {
            index: HashMap::new(),
            atoms: Vec::new(),
            alpha: Vec::new(),
            colors: Vec::new(),
            bonds: Vec::new(),
            bonded: HashSet::new(),
        }
    }

    fn piece(&mut self, frag: &MolGraph, keys: &[Key], node: usize, color: impl Fn(usize) -> u32) {
        let local: Vec<usize> = keys
            .iter()
            .enumerate()
            .map(|(x, k)| match self.index.get(k) {
                Some(&i) => {
                    self.atoms[i].aromatic |= frag.atom(x).aromatic;
                    i
                }
                None => {
                    let i = self.atoms.len();
                    self.index.insert(*k, i);
                    self.atoms.push(*frag.atom(x));
                    self.alpha.push(node);
                    self.colors.push(color(x));
                    i
                }
            })
            .collect();
        for b in frag.bonds() {
            let (a, c) = (local[b.a], local[b.b]);
            if self.bonded.insert((a.min(c), a.max(c))) {
                self.bonds.push(Bond::new(a, c, b.order));
            }
        }
    }

    fn finish(self) -> NeighborhoodGraph {
        let graph = MolGraph::fragment(self.atoms, self.bonds)
            .expect("neighborhood of a valence-checked skeleton is within valence");
        let key = write_canonical_colored(&graph, &self.colors);
        NeighborhoodGraph {
            graph,
            alpha: self.alpha,
            colors: self.colors,
            key,
        }
    }
}

/// Merges the center, parent and given children. `children[k]` is the k-th
/// child (colored `k + 1`) with the skeleton atom each local atom maps to,
/// or `None` for an atom not yet placed.
fn build(
    nb: &Neighborhood,
    children: &[(usize, &MolGraph, Vec<Option<usize>>)],
) -> NeighborhoodGraph {
    let pin_base = 1 + nb.children.len() as u32;
    let parent_pin: HashMap<usize, u32> = nb
        .parent
        .iter()
        .flat_map(|p| {
            p.place
                .iter()
                .enumerate()
                .map(|(j, &g)| (g, pin_base + j as u32))
        })
        .collect();
    let mut b = Builder::new();
    let c = &nb.center;
    let keys: Vec<Key> = c.place.iter().map(|&g| Key::Placed(g)).collect();
    b.piece(&c.frag, &keys, c.node, |x| {
        parent_pin.get(&c.place[x]).copied().unwrap_or(0)
    });
    if let Some(p) = &nb.parent {
        let keys: Vec<Key> = p.place.iter().map(|&g| Key::Placed(g)).collect();
        b.piece(&p.frag, &keys, p.node, |x| pin_base + x as u32);
    }
    for (k, (node, frag, place)) in children.iter().enumerate() {
        let keys: Vec<Key> = place
            .iter()
            .enumerate()
            .map(|(x, g)| g.map_or(Key::New(k, x), Key::Placed))
            .collect();
        b.piece(frag, &keys, *node, |_| 1 + k as u32);
    }
    b.finish()
}

/// The neighborhood graph with every child already placed, e.g. the true
/// local subgraph of a known molecule.
pub fn placed_neighborhood_graph(nb: &Neighborhood, children: &[Placed]) -> NeighborhoodGraph {
    let kids: Vec<(usize, &MolGraph, Vec<Option<usize>>)> = children
        .iter()
        .map(|p| (p.node, &p.frag, p.place.iter().map(|&g| Some(g)).collect()))
        .collect();
    build(nb, &kids)
}

/// One distinct way to attach every child of a neighborhood.
#[derive(Debug, Clone)]
pub struct Candidate {
    /// Per child, in neighborhood order.
    pub attachments: Vec<Attachment>,
    pub merged: NeighborhoodGraph,
}

fn candidate_graph(nb: &Neighborhood, atts: &[Attachment]) -> NeighborhoodGraph {
    let kids: Vec<(usize, &MolGraph, Vec<Option<usize>>)> = nb
        .children
        .iter()
        .zip(atts)
        .map(|((node, frag), att)| {
            let place = (0..frag.num_atoms())
                .map(|x| {
                    att.pairs
                        .iter()
                        .find(|&&(cx, _)| cx == x)
                        .map(|&(_, a)| nb.center.place[a])
                })
                .collect();
            (*node, frag, place)
        })
        .collect();
    build(nb, &kids)
}

/// All distinct valence-valid attachments of the neighborhood's children,
/// in enumeration order. Children are added one at a time and partial
/// merges are deduplicated after each, which yields the same classes as
/// deduplicating full merges.
pub fn enumerate_candidates(skel: &Skeleton, nb: &Neighborhood) -> Result<Vec<Candidate>> {
    enumerate_capped(skel, nb, usize::MAX)
}

/// As [`enumerate_candidates`], but keeps only the first `cap` partial
/// merges after each child, bounding the work on crowded neighborhoods.
pub fn enumerate_capped(skel: &Skeleton, nb: &Neighborhood, cap: usize) -> Result<Vec<Candidate>> {
    struct Partial {
        atts: Vec<Attachment>,
        extra: Vec<u32>,
        claimed: Vec<bool>,
        merged: NeighborhoodGraph,
    }
    let center = &nb.center;
    let n = center.frag.num_atoms();
    let mut partial = vec![Partial {
        atts: Vec::new(),
        extra: vec![0; n],
        claimed: vec![false; n],
        merged: candidate_graph(nb, &[]),
    }];
    for (_, child) in &nb.children {
        let options = attachment_options(&center.frag, child);
        let single = child.num_atoms() == 1;
        let mut next = Vec::new();
        let mut seen = HashSet::new();
        'grow: for p in &partial {
            for opt in &options {
                if next.len() == cap {
                    break 'grow;
                }
                if single && p.claimed[opt.pairs[0].1]
                    || !skel.fits(&center.place, &p.extra, child, opt)
                {
                    continue;
                }
                let mut atts = p.atts.clone();
                atts.push(opt.clone());
                let merged = candidate_graph(nb, &atts);
                if seen.insert(merged.key.clone()) {
                    let mut extra = p.extra.clone();
                    for (a, add) in added_half_units(child, opt) {
                        extra[a] += add;
                    }
                    let mut claimed = p.claimed.clone();
                    if single {
                        claimed[opt.pairs[0].1] = true;
                    }
                    next.push(Partial {
                        atts,
                        extra,
                        claimed,
                        merged,
                    });
                }
            }
        }
        if next.is_empty() {
            return Err(Error::EmptyCandidates(center.node));
        }
        partial = next;
    }
    Ok(partial
        .into_iter()
        .map(|p| Candidate {
            attachments: p.atts,
            merged: p.merged,
        })
        .collect())
}
