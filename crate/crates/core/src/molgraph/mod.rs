//! Molecular graph data model.
//!
//! Atoms carry an element, a formal charge and an aromatic flag; bonds carry an
//! order. Hydrogens are always implicit. Every [`MolGraph`] built through
//! [`MolGraph::new`] or [`parse_smiles`] is connected and passes the valence
//! table, and every aromatic atom sits on a cycle of aromatic bonds.
//!
//! Fragments (cluster labels, fingerprint environments) are built with
//! [`MolGraph::fragment`], which keeps the valence check but skips the
//! connectivity and aromatic-cycle requirements.

mod canon;
mod fingerprint;
mod iso;
mod property;
mod rings;
mod smiles;

pub use canon::{canonical_ranking, write_canonical, write_canonical_colored};
pub use fingerprint::{fnv1a32, fnv1a64, morgan_fingerprint, tanimoto, Fingerprint};
pub use iso::{is_isomorphic, is_isomorphic_colored};
pub use property::{desk_property, PropertyFn, PropertyRegistry};
pub use rings::find_sssr;
pub use smiles::{parse_fragment, parse_smiles};

use crate::error::{Error, Result};
use std::fmt;

/// Supported elements, in canonical ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    C,
    N,
    O,
    S,
    P,
    F,
    Cl,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 9] = [
        Element::C,
        Element::N,
        Element::O,
        Element::S,
        Element::P,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::S => "S",
            Element::P => "P",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Element> {
        Element::ALL.iter().copied().find(|e| e.symbol() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Elements allowed to carry the aromatic flag.
    pub fn can_be_aromatic(self) -> bool {
        matches!(
            self,
            Element::C | Element::N | Element::O | Element::S | Element::P
        )
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    pub aromatic: bool,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            charge: 0,
            aromatic: false,
        }
    }

    pub fn charged(element: Element, charge: i8) -> Self {
        Atom {
            element,
            charge,
            aromatic: false,
        }
    }

    /// Same element and charge. Aromaticity is decided by bonds, so it is not
    /// part of attachment matching.
    pub fn same_kind(&self, other: &Atom) -> bool {
        self.element == other.element && self.charge == other.charge
    }
}

/// Maximum total bond order for an element at a given formal charge.
///
/// Neutral: C 4, N 3, O 2, S 6, P 5, halogens 1. Cations of N/O/S/P gain one,
/// anions lose one; charged carbon loses one per unit of charge.
pub fn max_valence(element: Element, charge: i8) -> u32 {
    let c = charge as i32;
    let v = match element {
        Element::C => 4 - c.abs(),
        Element::N => 3 + c,
        Element::O => 2 + c,
        Element::S => 6 - c.abs(),
        Element::P => 5 - c.abs(),
        Element::F | Element::Cl | Element::Br | Element::I => {
            if c == 0 {
                1
            } else {
                1 - c.abs()
            }
        }
    };
    v.max(0) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub const ALL: [BondOrder; 4] = [
        BondOrder::Single,
        BondOrder::Double,
        BondOrder::Triple,
        BondOrder::Aromatic,
    ];

    /// Contribution to valence in half-units (aromatic counts 1.5).
    pub fn half_units(self) -> u32 {
        match self {
            BondOrder::Single => 2,
            BondOrder::Double => 4,
            BondOrder::Triple => 6,
            BondOrder::Aromatic => 3,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn new(a: usize, b: usize, order: BondOrder) -> Self {
        Bond { a, b, order }
    }

    pub fn other(&self, x: usize) -> usize {
        if self.a == x {
            self.b
        } else {
            self.a
        }
    }
}

/// Valence used by an atom given the half-unit sum of its bonds.
///
/// Aromatic contributions are summed as 1.5 each and the total is rounded
/// down, so a fused aromatic carbon (three aromatic bonds) uses 4.
pub fn used_valence(half_units: u32) -> u32 {
    half_units / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// Per atom: (neighbor, bond index).
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolGraph {
    /// Builds a fully validated molecule.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<MolGraph> {
        let g = MolGraph::fragment(atoms, bonds)?;
        if g.atoms.is_empty() {
            return Err(Error::InvalidGraph("no atoms".into()));
        }
        if !g.is_connected() {
            return Err(Error::UnsupportedFeature(
                "disconnected molecule (multiple fragments)".into(),
            ));
        }
        g.check_aromatic()?;
        Ok(g)
    }

    /// Builds a graph with structural and valence checks only.
    pub fn fragment(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<MolGraph> {
        let g = MolGraph::from_parts_unchecked(atoms, bonds)?;
        g.check_valence()?;
        Ok(g)
    }

    /// Structural checks only: endpoints in range, no self loops, no duplicate
    /// atom pairs.
    pub(crate) fn from_parts_unchecked(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<MolGraph> {
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        for (i, b) in bonds.iter().enumerate() {
            if b.a >= n || b.b >= n {
                return Err(Error::InvalidGraph(format!(
                    "bond {i} endpoint out of range"
                )));
            }
            if b.a == b.b {
                return Err(Error::InvalidGraph(format!("bond {i} is a self loop")));
            }
            if adjacency[b.a].iter().any(|&(x, _)| x == b.b) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate bond between atoms {} and {}",
                    b.a, b.b
                )));
            }
            adjacency[b.a].push((b.b, i));
            adjacency[b.b].push((b.a, i));
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.aromatic && !a.element.can_be_aromatic() {
                return Err(Error::InvalidGraph(format!(
                    "atom {i}: {} cannot be aromatic",
                    a.element
                )));
            }
            if !(-2..=2).contains(&a.charge) {
                return Err(Error::UnsupportedFeature(format!(
                    "charge {} on atom {i}",
                    a.charge
                )));
            }
        }
        Ok(MolGraph {
            atoms,
            bonds,
            adjacency,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_bonds(&self) -> usize {
        self.bonds.len()
    }

    /// (neighbor, bond index) pairs of atom `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(x, _)| x == b)
            .map(|&(_, bi)| &self.bonds[bi])
    }

    pub fn valence_half_units(&self, i: usize) -> u32 {
        self.adjacency[i]
            .iter()
            .map(|&(_, bi)| self.bonds[bi].order.half_units())
            .sum()
    }

    /// Remaining valence (in whole bond orders) before the table is exceeded.
    pub fn free_valence(&self, i: usize) -> u32 {
        let a = &self.atoms[i];
        max_valence(a.element, a.charge).saturating_sub(used_valence(self.valence_half_units(i)))
    }

    pub fn check_valence(&self) -> Result<()> {
        for (i, a) in self.atoms.iter().enumerate() {
            let used = used_valence(self.valence_half_units(i));
            let max = max_valence(a.element, a.charge);
            if used > max {
                return Err(Error::Valence {
                    atom: i,
                    element: a.element.to_string(),
                    used,
                    max,
                });
            }
        }
        Ok(())
    }

    /// Aromatic bonds join aromatic atoms and lie on a cycle of aromatic
    /// bonds; aromatic atoms have at least one aromatic bond.
    fn check_aromatic(&self) -> Result<()> {
        for (i, b) in self.bonds.iter().enumerate() {
            if b.order != BondOrder::Aromatic {
                continue;
            }
            if !self.atoms[b.a].aromatic || !self.atoms[b.b].aromatic {
                return Err(Error::InvalidGraph(format!(
                    "aromatic bond {i} joins a non-aromatic atom"
                )));
            }
            if !self.aromatic_cycle_through(i) {
                return Err(Error::InvalidGraph(format!(
                    "aromatic bond {i} is not on an aromatic ring"
                )));
            }
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if a.aromatic
                && !self.adjacency[i]
                    .iter()
                    .any(|&(_, bi)| self.bonds[bi].order == BondOrder::Aromatic)
            {
                return Err(Error::InvalidGraph(format!(
                    "aromatic atom {i} is not on an aromatic ring"
                )));
            }
        }
        Ok(())
    }

    /// True if the endpoints of bond `skip` stay connected through other
    /// aromatic bonds.
    fn aromatic_cycle_through(&self, skip: usize) -> bool {
        let b = self.bonds[skip];
        let mut seen = vec![false; self.atoms.len()];
        let mut stack = vec![b.a];
        seen[b.a] = true;
        while let Some(x) = stack.pop() {
            if x == b.b {
                return true;
            }
            for &(y, bi) in &self.adjacency[x] {
                if bi != skip && self.bonds[bi].order == BondOrder::Aromatic && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        false
    }

    pub fn is_connected(&self) -> bool {
        if self.atoms.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.atoms.len()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for &(y, _) in &self.adjacency[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        count == self.atoms.len()
    }

    /// Bonds whose removal disconnects the graph, as a per-bond flag.
    pub fn bridges(&self) -> Vec<bool> {
        let n = self.atoms.len();
        let mut is_bridge = vec![false; self.bonds.len()];
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut timer = 0;
        for start in 0..n {
            if disc[start] != usize::MAX {
                continue;
            }
            // iterative DFS: (vertex, parent bond, next neighbor position)
            let mut stack: Vec<(usize, usize, usize)> = vec![(start, usize::MAX, 0)];
            disc[start] = timer;
            low[start] = timer;
            timer += 1;
            while let Some(&mut (v, pb, ref mut pos)) = stack.last_mut() {
                if *pos < self.adjacency[v].len() {
                    let (w, bi) = self.adjacency[v][*pos];
                    *pos += 1;
                    if bi == pb {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        stack.push((w, bi, 0));
                    } else {
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(p, _, _)) = stack.last() {
                        low[p] = low[p].min(low[v]);
                        if low[v] > disc[p] {
                            is_bridge[pb] = true;
                        }
                    }
                }
            }
        }
        is_bridge
    }

    /// Per-bond flag: bond lies on some cycle.
    pub fn ring_bonds(&self) -> Vec<bool> {
        self.bridges().into_iter().map(|b| !b).collect()
    }

    /// Subgraph induced by `atoms` (in the given order). Aromatic atom flags
    /// are kept as in the parent.
    pub fn induced_subgraph(&self, atoms: &[usize]) -> MolGraph {
        let mut local = vec![usize::MAX; self.atoms.len()];
        for (i, &a) in atoms.iter().enumerate() {
            local[a] = i;
        }
        let new_atoms = atoms.iter().map(|&a| self.atoms[a]).collect();
        let mut new_bonds = Vec::new();
        for b in &self.bonds {
            let (x, y) = (local[b.a], local[b.b]);
            if x != usize::MAX && y != usize::MAX {
                new_bonds.push(Bond::new(x, y, b.order));
            }
        }
        MolGraph::from_parts_unchecked(new_atoms, new_bonds)
            .expect("induced subgraph of a valid graph is structurally valid")
    }

    /// Same graph with atoms renumbered: new index of old atom `i` is `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        let mut atoms = vec![self.atoms[0]; self.atoms.len()];
        for (i, &p) in perm.iter().enumerate() {
            atoms[p] = self.atoms[i];
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond::new(perm[b.a], perm[b.b], b.order))
            .collect();
        MolGraph::from_parts_unchecked(atoms, bonds).expect("permutation preserves structure")
    }

    /// Atoms within `radius` bonds of `root`, sorted by index.
    pub fn ball(&self, root: usize, radius: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.atoms.len()];
        dist[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            if dist[x] == radius {
                continue;
            }
            for &(y, _) in &self.adjacency[x] {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        (0..self.atoms.len())
            .filter(|&i| dist[i] != usize::MAX)
            .collect()
    }
}

impl fmt::Display for MolGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&write_canonical(self))
    }
}
