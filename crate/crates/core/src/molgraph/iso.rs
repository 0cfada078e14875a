//! Graph isomorphism by joint refinement and backtracking.

use super::canon::refine;
use super::{Atom, Bond, BondOrder, MolGraph};

/// True iff some atom bijection preserves element, charge, aromatic flag and
/// bond orders.
pub fn is_isomorphic(a: &MolGraph, b: &MolGraph) -> bool {
    is_isomorphic_colored(a, &vec![0; a.num_atoms()], b, &vec![0; b.num_atoms()])
}

/// Like [`is_isomorphic`], with the bijection also required to preserve the
/// given per-atom colors.
pub fn is_isomorphic_colored(a: &MolGraph, ca: &[u32], b: &MolGraph, cb: &[u32]) -> bool {
    let n = a.num_atoms();
    if n != b.num_atoms() || a.num_bonds() != b.num_bonds() {
        return false;
    }
    if n == 0 {
        return true;
    }
    // refine the disjoint union so classes are comparable across both sides
    let mut atoms: Vec<Atom> = a.atoms().to_vec();
    atoms.extend_from_slice(b.atoms());
    let mut bonds: Vec<Bond> = a.bonds().to_vec();
    bonds.extend(
        b.bonds()
            .iter()
            .map(|x| Bond::new(x.a + n, x.b + n, x.order)),
    );
    let union = MolGraph::from_parts_unchecked(atoms, bonds).expect("disjoint union is valid");
    let keys: Vec<(u32, Atom, usize, Vec<BondOrder>)> = (0..2 * n)
        .map(|i| {
            let mut orders: Vec<BondOrder> = union
                .neighbors(i)
                .iter()
                .map(|&(_, bi)| union.bonds()[bi].order)
                .collect();
            orders.sort();
            let color = if i < n { ca[i] } else { cb[i - n] };
            (color, *union.atom(i), union.degree(i), orders)
        })
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    sorted.dedup();
    let initial: Vec<usize> = keys
        .iter()
        .map(|k| sorted.binary_search(k).expect("present"))
        .collect();
    let classes = refine(&union, initial);

    let mut hist_a = classes[..n].to_vec();
    let mut hist_b = classes[n..].to_vec();
    hist_a.sort_unstable();
    hist_b.sort_unstable();
    if hist_a != hist_b {
        return false;
    }

    let order = bfs_order(a);
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    backtrack(
        a,
        b,
        &classes[..n],
        &classes[n..],
        &order,
        0,
        &mut map,
        &mut used,
    )
}

fn bfs_order(g: &MolGraph) -> Vec<usize> {
    let n = g.num_atoms();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut q = std::collections::VecDeque::from([s]);
        while let Some(x) = q.pop_front() {
            order.push(x);
            for &(y, _) in g.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    q.push_back(y);
                }
            }
        }
    }
    order
}

#[allow(clippy::too_many_arguments)]
fn backtrack(
    a: &MolGraph,
    b: &MolGraph,
    ka: &[usize],
    kb: &[usize],
    order: &[usize],
    depth: usize,
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    let Some(&x) = order.get(depth) else {
        return true;
    };
    for y in 0..b.num_atoms() {
        if used[y] || ka[x] != kb[y] {
            continue;
        }
        let consistent = a.neighbors(x).iter().all(|&(xn, bi)| {
            let yn = map[xn];
            yn == usize::MAX
                || b.bond_between(y, yn)
                    .is_some_and(|bb| bb.order == a.bonds()[bi].order)
        });
        // y must have no mapped neighbors beyond the images of x's
        let mapped_a = a
            .neighbors(x)
            .iter()
            .filter(|&&(xn, _)| map[xn] != usize::MAX)
            .count();
        let mapped_b = b.neighbors(y).iter().filter(|&&(yn, _)| used[yn]).count();
        if !consistent || mapped_a != mapped_b {
            continue;
        }
        map[x] = y;
        used[y] = true;
        if backtrack(a, b, ka, kb, order, depth + 1, map, used) {
            return true;
        }
        map[x] = usize::MAX;
        used[y] = false;
    }
    false
}
