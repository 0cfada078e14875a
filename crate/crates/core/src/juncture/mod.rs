//! Junction-tree decomposition of molecular graphs.
//!
//! Clusters are the non-ring bonds, the smallest rings (rings sharing more
//! than two atoms merged transitively) and single atoms where three or more
//! of those clusters meet. The tree is the maximum spanning tree of the
//! cluster intersection graph.

mod vocab;

pub use vocab::{assign_labels, build_vocabulary, Vocabulary};

use crate::error::{Error, Result};
use crate::molgraph::{find_sssr, write_canonical, Atom, BondOrder, MolGraph};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClusterKind {
    Atom,
    Bond,
    Ring,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    /// Sorted atom indices into the parent molecule.
    pub atoms: Vec<usize>,
    pub kind: ClusterKind,
    pub label: String,
}

impl Cluster {
    pub fn contains(&self, atom: usize) -> bool {
        self.atoms.binary_search(&atom).is_ok()
    }

    pub fn shared_atoms(&self, other: &Cluster) -> Vec<usize> {
        self.atoms
            .iter()
            .copied()
            .filter(|&a| other.contains(a))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JunctionTree {
    pub nodes: Vec<Cluster>,
    pub edges: Vec<(usize, usize)>,
    pub root: usize,
}

/// Parent/children view of a junction tree hung from its root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    pub root: usize,
    pub parent: Vec<Option<usize>>,
    /// Children ordered by (label, smallest atom shared with the parent).
    pub children: Vec<Vec<usize>>,
    /// Depth-first preorder following `children`.
    pub preorder: Vec<usize>,
}

/// The cluster subgraph used for labels: atoms are aromatic only when they
/// carry an aromatic bond inside the cluster.
pub fn cluster_fragment(g: &MolGraph, atoms: &[usize]) -> MolGraph {
    let sub = g.induced_subgraph(atoms);
    let flags: Vec<bool> = (0..sub.num_atoms())
        .map(|i| {
            sub.neighbors(i)
                .iter()
                .any(|&(_, bi)| sub.bonds()[bi].order == BondOrder::Aromatic)
        })
        .collect();
    let new_atoms: Vec<Atom> = sub
        .atoms()
        .iter()
        .zip(&flags)
        .map(|(a, &f)| Atom { aromatic: f, ..*a })
        .collect();
    MolGraph::fragment(new_atoms, sub.bonds().to_vec())
        .expect("subgraph of a valid molecule passes valence")
}

pub fn cluster_label(g: &MolGraph, atoms: &[usize]) -> String {
    write_canonical(&cluster_fragment(g, atoms))
}

impl JunctionTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn rooted(&self) -> RootedTree {
        let n = self.nodes.len();
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut seen = vec![false; n];
        let mut stack = vec![self.root];
        seen[self.root] = true;
        while let Some(x) = stack.pop() {
            for y in self.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = Some(x);
                    children[x].push(y);
                    stack.push(y);
                }
            }
        }
        for (x, kids) in children.iter_mut().enumerate() {
            let node = &self.nodes[x];
            kids.sort_by(|&a, &b| {
                let ka = (
                    &self.nodes[a].label,
                    node.shared_atoms(&self.nodes[a]).first().copied(),
                );
                let kb = (
                    &self.nodes[b].label,
                    node.shared_atoms(&self.nodes[b]).first().copied(),
                );
                ka.cmp(&kb).then(a.cmp(&b))
            });
        }
        let mut preorder = Vec::with_capacity(n);
        let mut stack = vec![self.root];
        while let Some(x) = stack.pop() {
            preorder.push(x);
            stack.extend(children[x].iter().rev());
        }
        RootedTree {
            root: self.root,
            parent,
            children,
            preorder,
        }
    }

    /// S-expression `("label" child...)` with children in rooted order.
    pub fn dump(&self) -> String {
        fn rec(t: &JunctionTree, r: &RootedTree, x: usize, out: &mut String) {
            let _ = write!(out, "(\"{}\"", t.nodes[x].label);
            for &c in &r.children[x] {
                out.push(' ');
                rec(t, r, c, out);
            }
            out.push(')');
        }
        let r = self.rooted();
        let mut out = String::new();
        if !self.nodes.is_empty() {
            rec(self, &r, self.root, &mut out);
        }
        out
    }

    /// Nodes on the tree path from `a` to `b`, inclusive.
    pub fn path(&self, a: usize, b: usize) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut prev = vec![usize::MAX; n];
        prev[a] = a;
        let mut stack = vec![a];
        while let Some(x) = stack.pop() {
            for y in self.neighbors(x) {
                if prev[y] == usize::MAX {
                    prev[y] = x;
                    stack.push(y);
                }
            }
        }
        if prev[b] == usize::MAX {
            return None;
        }
        let mut path = vec![b];
        let mut x = b;
        while x != a {
            x = prev[x];
            path.push(x);
        }
        path.reverse();
        Some(path)
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    /// Returns false if already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Decomposes a connected molecule into a junction tree.
pub fn decompose(g: &MolGraph) -> Result<JunctionTree> {
    let n = g.num_atoms();
    if n == 0 {
        return Err(Error::Decomposition("empty molecule".into()));
    }
    if !g.is_connected() {
        return Err(Error::Decomposition("molecule is disconnected".into()));
    }
    if n == 1 {
        let node = Cluster {
            atoms: vec![0],
            kind: ClusterKind::Atom,
            label: cluster_label(g, &[0]),
        };
        return Ok(JunctionTree {
            nodes: vec![node],
            edges: Vec::new(),
            root: 0,
        });
    }

    let bridges = g.bridges();
    let mut sets: Vec<(Vec<usize>, ClusterKind)> = Vec::new();
    for (bi, b) in g.bonds().iter().enumerate() {
        if bridges[bi] {
            let mut atoms = vec![b.a, b.b];
            atoms.sort_unstable();
            sets.push((atoms, ClusterKind::Bond));
        }
    }
    for ring in merge_bridged(find_sssr(g)) {
        sets.push((ring, ClusterKind::Ring));
    }

    // atoms where three or more clusters meet, unless the atom sits in a
    // two-atom overlap (fused rings), which needs a direct cluster edge
    let mut membership = vec![Vec::new(); n];
    for (ci, (atoms, _)) in sets.iter().enumerate() {
        for &a in atoms {
            membership[a].push(ci);
        }
    }
    let overlap = |i: usize, j: usize| -> usize {
        sets[i]
            .0
            .iter()
            .filter(|a| sets[j].0.binary_search(a).is_ok())
            .count()
    };
    let junctions: Vec<usize> = (0..n)
        .filter(|&a| {
            let cs = &membership[a];
            cs.len() >= 3
                && !cs
                    .iter()
                    .enumerate()
                    .any(|(k, &i)| cs[k + 1..].iter().any(|&j| overlap(i, j) >= 2))
        })
        .collect();
    sets.extend(junctions.into_iter().map(|a| (vec![a], ClusterKind::Atom)));

    sets.sort();
    let nodes: Vec<Cluster> = sets
        .into_iter()
        .map(|(atoms, kind)| Cluster {
            label: cluster_label(g, &atoms),
            atoms,
            kind,
        })
        .collect();

    // (infinite tier, overlap size, i, j)
    let mut candidates: Vec<(bool, usize, usize, usize)> = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let shared = nodes[i].shared_atoms(&nodes[j]).len();
            if shared > 0 {
                let inf = nodes[i].kind == ClusterKind::Atom || nodes[j].kind == ClusterKind::Atom;
                candidates.push((inf, shared, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| {
        (y.0, y.1)
            .cmp(&(x.0, x.1))
            .then((x.2, x.3).cmp(&(y.2, y.3)))
    });
    let mut uf = UnionFind::new(nodes.len());
    let mut edges = Vec::new();
    for (_, _, i, j) in candidates {
        if uf.union(i, j) {
            edges.push((i, j));
        }
    }
    if edges.len() + 1 != nodes.len() {
        return Err(Error::Decomposition("cluster graph is disconnected".into()));
    }

    let root = choose_root(&nodes, &edges);
    Ok(JunctionTree { nodes, edges, root })
}

/// Leaf holding the smallest atom index; a single node is its own root.
fn choose_root(nodes: &[Cluster], edges: &[(usize, usize)]) -> usize {
    let mut degree = vec![0usize; nodes.len()];
    for &(a, b) in edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    (0..nodes.len())
        .filter(|&i| degree[i] <= 1)
        .min_by_key(|&i| (nodes[i].atoms[0], i))
        .expect("every tree has a leaf")
}

/// Merges rings sharing more than two atoms until no such pair remains.
fn merge_bridged(mut rings: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    loop {
        let mut merged = false;
        'outer: for i in 0..rings.len() {
            for j in i + 1..rings.len() {
                let shared = rings[i].iter().filter(|a| rings[j].contains(a)).count();
                if shared > 2 {
                    let other = rings.remove(j);
                    rings[i].extend(other);
                    rings[i].sort_unstable();
                    rings[i].dedup();
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            return rings;
        }
    }
}

/// Every violated junction-tree invariant of `t` against `g`.
pub fn verify(t: &JunctionTree, g: &MolGraph) -> Vec<String> {
    let mut out = Vec::new();
    let n = t.nodes.len();
    if n == 0 {
        out.push("tree: no clusters".to_string());
        return out;
    }
    if t.root >= n {
        out.push(format!("tree: root {} out of range", t.root));
    }
    let mut uf = UnionFind::new(n);
    for &(a, b) in &t.edges {
        if a >= n || b >= n {
            out.push(format!("tree: edge ({a},{b}) out of range"));
            return out;
        }
        if !uf.union(a, b) {
            out.push(format!("tree: edge ({a},{b}) closes a cycle"));
        }
    }
    if t.edges.len() + 1 != n {
        out.push(format!(
            "tree: {} edges for {} clusters (not a spanning tree)",
            t.edges.len(),
            n
        ));
    }

    for (i, c) in t.nodes.iter().enumerate() {
        if c.atoms.iter().any(|&a| a >= g.num_atoms()) {
            out.push(format!("cluster {i}: atom index out of range"));
            return out;
        }
        let size_ok = match c.kind {
            ClusterKind::Atom => c.atoms.len() == 1,
            ClusterKind::Bond => {
                c.atoms.len() == 2 && g.bond_between(c.atoms[0], c.atoms[1]).is_some()
            }
            ClusterKind::Ring => c.atoms.len() >= 3,
        };
        if !size_ok {
            out.push(format!(
                "cluster {i}: kind {:?} does not match its atoms",
                c.kind
            ));
        }
        let label = cluster_label(g, &c.atoms);
        if label != c.label {
            out.push(format!(
                "cluster {i}: label {} differs from {}",
                c.label, label
            ));
        }
    }

    for a in 0..g.num_atoms() {
        if !t.nodes.iter().any(|c| c.contains(a)) {
            out.push(format!("union coverage: atom {a} is in no cluster"));
        }
    }
    for (bi, b) in g.bonds().iter().enumerate() {
        if !t.nodes.iter().any(|c| c.contains(b.a) && c.contains(b.b)) {
            out.push(format!(
                "union coverage: bond {bi} ({}-{}) is in no cluster",
                b.a, b.b
            ));
        }
    }

    for i in 0..n {
        for j in i + 1..n {
            let shared = t.nodes[i].shared_atoms(&t.nodes[j]);
            if shared.len() > 2 {
                out.push(format!(
                    "pairwise overlap: clusters {i} and {j} share {} atoms",
                    shared.len()
                ));
            }
            if shared.is_empty() {
                continue;
            }
            let Some(path) = t.path(i, j) else {
                continue;
            };
            for &k in &path[1..path.len() - 1] {
                if !shared.iter().all(|&a| t.nodes[k].contains(a)) {
                    out.push(format!(
                        "running intersection: cluster {k} on the path between {i} and {j} misses shared atoms"
                    ));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn tree(s: &str) -> (MolGraph, JunctionTree) {
        let g = parse_smiles(s).unwrap();
        let t = decompose(&g).unwrap();
        assert_eq!(verify(&t, &g), Vec::<String>::new(), "{s}");
        (g, t)
    }

    fn kinds(t: &JunctionTree) -> Vec<ClusterKind> {
        let mut k: Vec<ClusterKind> = t.nodes.iter().map(|c| c.kind).collect();
        k.sort();
        k
    }

    #[test]
    fn single_atom() {
        let (_, t) = tree("C");
        assert_eq!(kinds(&t), [ClusterKind::Atom]);
        assert!(t.edges.is_empty());
    }

    #[test]
    fn ethanol_two_bonds() {
        let (_, t) = tree("CCO");
        assert_eq!(kinds(&t), [ClusterKind::Bond, ClusterKind::Bond]);
        assert_eq!(t.edges.len(), 1);
    }

    #[test]
    fn toluene_ring_and_bond() {
        let (_, t) = tree("Cc1ccccc1");
        assert_eq!(kinds(&t), [ClusterKind::Bond, ClusterKind::Ring]);
        assert_eq!(t.edges.len(), 1);
    }

    #[test]
    fn isobutane_star() {
        let (_, t) = tree("CC(C)C");
        assert_eq!(
            kinds(&t),
            [
                ClusterKind::Atom,
                ClusterKind::Bond,
                ClusterKind::Bond,
                ClusterKind::Bond
            ]
        );
        let center = t
            .nodes
            .iter()
            .position(|c| c.kind == ClusterKind::Atom)
            .unwrap();
        assert_eq!(t.neighbors(center).len(), 3);
    }

    #[test]
    fn norbornane_merged() {
        let (_, t) = tree("C1CC2CCC1C2");
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.nodes[0].atoms.len(), 7);
        assert_eq!(t.nodes[0].kind, ClusterKind::Ring);
    }

    #[test]
    fn substituted_fusion_atom() {
        tree("CC12CCCCC1CCCC2");
        tree("c1ccc2ccccc2c1");
        tree("CC1(C)CCC2(CC1)CCCC2");
    }

    #[test]
    fn root_is_leaf_with_smallest_atom() {
        let (_, t) = tree("CC(C)C");
        assert!(t.nodes[t.root].contains(0));
        assert_eq!(t.neighbors(t.root).len(), 1);
    }

    #[test]
    fn deleting_cluster_breaks_coverage() {
        let (g, mut t) = tree("Cc1ccccc1");
        let ring = t
            .nodes
            .iter()
            .position(|c| c.kind == ClusterKind::Ring)
            .unwrap();
        t.nodes.remove(ring);
        t.edges.clear();
        t.root = 0;
        assert!(verify(&t, &g).iter().any(|v| v.contains("union coverage")));
    }

    #[test]
    fn rewired_leaf_breaks_running_intersection() {
        // every isobutane cluster holds the central atom, so extend one arm
        let (g, mut t) = tree("CC(C)CO");
        let find = |t: &JunctionTree, a: usize, b: usize| {
            t.nodes.iter().position(|c| c.atoms == [a, b]).unwrap()
        };
        let tail = find(&t, 3, 4);
        let arm = find(&t, 1, 3);
        let other = find(&t, 0, 1);
        let e = t
            .edges
            .iter()
            .position(|&(a, b)| (a, b) == (tail, arm) || (b, a) == (tail, arm))
            .unwrap();
        t.edges[e] = (other, tail);
        let v = verify(&t, &g);
        assert!(
            v.iter().any(|m| m.contains("running intersection")),
            "{v:?}"
        );
    }

    #[test]
    fn dump_is_deterministic() {
        let (_, a) = tree("CC(=O)Nc1ccc(O)cc1");
        let (_, b) = tree("CC(=O)Nc1ccc(O)cc1");
        assert_eq!(a.dump(), b.dump());
        assert!(a.dump().starts_with("(\""));
    }
}
