//! Isomorphism by exhaustive search over atom bijections, and random small
//! graphs to feed it.

use jtvae::molgraph::{max_valence, Atom, Bond, BondOrder, Element, MolGraph};
use rand::Rng;

fn order_between(g: &MolGraph, a: usize, b: usize) -> Option<BondOrder> {
    g.bonds()
        .iter()
        .find(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
        .map(|x| x.order)
}

/// True iff a bijection of atoms preserves atoms, colors and every atom
/// pair's bond (or its absence). Tries every permutation, abandoning a
/// prefix as soon as one of its pairs disagrees.
pub fn brute_isomorphic(a: &MolGraph, ca: &[u32], b: &MolGraph, cb: &[u32]) -> bool {
    let n = a.num_atoms();
    if n != b.num_atoms() || a.num_bonds() != b.num_bonds() {
        return false;
    }
    let adj = |g: &MolGraph| -> Vec<Vec<Option<BondOrder>>> {
        (0..n)
            .map(|i| (0..n).map(|j| order_between(g, i, j)).collect())
            .collect()
    };
    let (ma, mb) = (adj(a), adj(b));
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    extend(0, a, ca, b, cb, &ma, &mb, &mut map, &mut used)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    i: usize,
    a: &MolGraph,
    ca: &[u32],
    b: &MolGraph,
    cb: &[u32],
    ma: &[Vec<Option<BondOrder>>],
    mb: &[Vec<Option<BondOrder>>],
    map: &mut Vec<usize>,
    used: &mut Vec<bool>,
) -> bool {
    let n = map.len();
    if i == n {
        return true;
    }
    for j in 0..n {
        if used[j] || a.atom(i) != b.atom(j) || ca[i] != cb[j] {
            continue;
        }
        if (0..i).any(|k| ma[i][k] != mb[j][map[k]]) {
            continue;
        }
        map[i] = j;
        used[j] = true;
        if extend(i + 1, a, ca, b, cb, ma, mb, map, used) {
            return true;
        }
        used[j] = false;
    }
    map[i] = usize::MAX;
    false
}

/// A random graph of at most `max_atoms` atoms with every atom within its
/// valence. Aromatic bonds join only aromatic-flagged C/N atoms.
pub fn random_graph<R: Rng>(rng: &mut R, max_atoms: usize) -> MolGraph {
    let n = rng.random_range(1..=max_atoms);
    let pool = [
        Element::C,
        Element::C,
        Element::C,
        Element::N,
        Element::O,
        Element::S,
        Element::Cl,
    ];
    let atoms: Vec<Atom> = (0..n)
        .map(|_| {
            let element = pool[rng.random_range(0..pool.len())];
            let charge = if element == Element::N && rng.random_bool(0.15) {
                1
            } else {
                0
            };
            let aromatic = matches!(element, Element::C | Element::N) && rng.random_bool(0.3);
            Atom {
                element,
                charge,
                aromatic,
            }
        })
        .collect();
    let mut half = vec![0u32; n];
    let mut bonds = Vec::new();
    let tries = rng.random_range(0..=2 * n);
    for _ in 0..tries {
        let (x, y) = (rng.random_range(0..n), rng.random_range(0..n));
        if x == y
            || bonds
                .iter()
                .any(|b: &Bond| (b.a == x && b.b == y) || (b.a == y && b.b == x))
        {
            continue;
        }
        let order = if atoms[x].aromatic && atoms[y].aromatic && rng.random_bool(0.6) {
            BondOrder::Aromatic
        } else {
            [
                BondOrder::Single,
                BondOrder::Single,
                BondOrder::Double,
                BondOrder::Triple,
            ][rng.random_range(0..4)]
        };
        let h = order.half_units();
        let fits = |i: usize| (half[i] + h) / 2 <= max_valence(atoms[i].element, atoms[i].charge);
        if fits(x) && fits(y) {
            half[x] += h;
            half[y] += h;
            bonds.push(Bond::new(x, y, order));
        }
    }
    MolGraph::fragment(atoms, bonds).expect("built within valence")
}

/// The graph with its atoms relabeled by a random permutation.
pub fn shuffled<R: Rng>(rng: &mut R, g: &MolGraph) -> MolGraph {
    let mut perm: Vec<usize> = (0..g.num_atoms()).collect();
    for i in (1..perm.len()).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    g.permuted(&perm)
}
