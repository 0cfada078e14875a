//! Smallest set of smallest rings via Horton candidates and GF(2) elimination.

use super::MolGraph;
use std::collections::VecDeque;

/// Minimum cycle basis of `g`. Each ring is returned as its sorted atom
/// indices; rings are ordered by smallest atom index, then lexicographically.
pub fn find_sssr(g: &MolGraph) -> Vec<Vec<usize>> {
    let n = g.num_atoms();
    let m = g.num_bonds();
    let target = m + components(g) - n;
    if target == 0 {
        return Vec::new();
    }
    let words = m.div_ceil(64);

    let mut candidates: Vec<(Vec<usize>, Vec<u64>)> = Vec::new();
    for v in 0..n {
        let parent = bfs_tree(g, v);
        for (bi, b) in g.bonds().iter().enumerate() {
            let (Some(px), Some(py)) = (path_to(&parent, v, b.a), path_to(&parent, v, b.b)) else {
                continue;
            };
            // cycle: v..x, then x-y, then y..v
            let mut cycle = px.clone();
            cycle.extend(py.iter().skip(1).rev());
            let mut sorted = cycle.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != cycle.len() || cycle.len() < 3 {
                continue;
            }
            let mut bits = vec![0u64; words];
            let mut set = |e: usize| bits[e / 64] ^= 1 << (e % 64);
            set(bi);
            for w in px.windows(2).chain(py.windows(2)) {
                set(bond_index(g, w[0], w[1]));
            }
            candidates.push((sorted, bits));
        }
    }
    candidates.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
    candidates.dedup_by(|a, b| a.1 == b.1);

    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut rings = Vec::new();
    for (atoms, bits) in candidates {
        if let Some(pivot_row) = reduce(&basis, bits) {
            basis.push(pivot_row);
            rings.push(atoms);
            if rings.len() == target {
                break;
            }
        }
    }
    rings.sort_by(|a, b| a[0].cmp(&b[0]).then_with(|| a.cmp(b)));
    rings
}

/// Reduces `bits` against the basis rows; returns the new row with its pivot
/// if independent.
fn reduce(basis: &[(usize, Vec<u64>)], mut bits: Vec<u64>) -> Option<(usize, Vec<u64>)> {
    for (pivot, row) in basis {
        if bits[pivot / 64] >> (pivot % 64) & 1 == 1 {
            for (x, y) in bits.iter_mut().zip(row) {
                *x ^= y;
            }
        }
    }
    let word = bits.iter().position(|&w| w != 0)?;
    let pivot = word * 64 + bits[word].trailing_zeros() as usize;
    Some((pivot, bits))
}

fn bfs_tree(g: &MolGraph, root: usize) -> Vec<Option<usize>> {
    let mut parent = vec![None; g.num_atoms()];
    parent[root] = Some(root);
    let mut queue = VecDeque::from([root]);
    while let Some(x) = queue.pop_front() {
        let mut nb: Vec<usize> = g.neighbors(x).iter().map(|&(y, _)| y).collect();
        nb.sort_unstable();
        for y in nb {
            if parent[y].is_none() {
                parent[y] = Some(x);
                queue.push_back(y);
            }
        }
    }
    parent
}

/// Tree path root..=target, or None if unreachable.
fn path_to(parent: &[Option<usize>], root: usize, target: usize) -> Option<Vec<usize>> {
    let mut path = vec![target];
    let mut x = target;
    while x != root {
        x = parent[x]?;
        path.push(x);
    }
    path.reverse();
    Some(path)
}

fn bond_index(g: &MolGraph, a: usize, b: usize) -> usize {
    g.neighbors(a)
        .iter()
        .find(|&&(x, _)| x == b)
        .map(|&(_, bi)| bi)
        .expect("tree edge exists")
}

fn components(g: &MolGraph) -> usize {
    let n = g.num_atoms();
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            for &(y, _) in g.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    /// All simple cycles as (sorted atoms, sorted bond indices), by brute force.
    fn all_cycles(g: &MolGraph) -> Vec<(Vec<usize>, Vec<usize>)> {
        fn dfs(
            g: &MolGraph,
            start: usize,
            v: usize,
            path: &mut Vec<usize>,
            bonds: &mut Vec<usize>,
            out: &mut Vec<(Vec<usize>, Vec<usize>)>,
        ) {
            for &(w, bi) in g.neighbors(v) {
                if w == start && path.len() >= 3 {
                    let mut a = path.clone();
                    a.sort_unstable();
                    let mut b = bonds.clone();
                    b.push(bi);
                    b.sort_unstable();
                    if !out.iter().any(|(_, ob)| *ob == b) {
                        out.push((a, b));
                    }
                } else if w > start && !path.contains(&w) {
                    path.push(w);
                    bonds.push(bi);
                    dfs(g, start, w, path, bonds, out);
                    path.pop();
                    bonds.pop();
                }
            }
        }
        let mut out = Vec::new();
        for s in 0..g.num_atoms() {
            dfs(g, s, s, &mut vec![s], &mut Vec::new(), &mut out);
        }
        out
    }

    fn rank_gf2(sets: &[Vec<usize>], m: usize) -> usize {
        let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
        for s in sets {
            let mut bits = vec![0u64; m.div_ceil(64)];
            for &e in s {
                bits[e / 64] ^= 1 << (e % 64);
            }
            if let Some(r) = reduce(&basis, bits) {
                basis.push(r);
            }
        }
        basis.len()
    }

    fn ring_bonds(g: &MolGraph, ring: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = (0..g.num_bonds())
            .filter(|&bi| {
                let b = g.bonds()[bi];
                ring.contains(&b.a) && ring.contains(&b.b)
            })
            .collect();
        out.sort_unstable();
        out
    }

    #[test]
    fn acyclic_and_single_ring() {
        assert!(find_sssr(&parse_smiles("CCO").unwrap()).is_empty());
        let r = find_sssr(&parse_smiles("C1CCCCC1").unwrap());
        assert_eq!(r, vec![vec![0, 1, 2, 3, 4, 5]]);
    }

    #[test]
    fn norbornane_matches_brute_force() {
        let g = parse_smiles("C1CC2CCC1C2").unwrap();
        let rings = find_sssr(&g);
        assert_eq!(rings.len(), 2);
        assert!(rings.iter().all(|r| r.len() == 5));
        let shared = rings[0].iter().filter(|a| rings[1].contains(a)).count();
        assert!(shared >= 3);

        // oracle: minimum total size over all independent pairs of simple cycles
        let cycles = all_cycles(&g);
        let mut best = usize::MAX;
        for i in 0..cycles.len() {
            for j in i + 1..cycles.len() {
                let pair = [cycles[i].1.clone(), cycles[j].1.clone()];
                if rank_gf2(&pair, g.num_bonds()) == 2 {
                    best = best.min(cycles[i].0.len() + cycles[j].0.len());
                }
            }
        }
        assert_eq!(rings.iter().map(Vec::len).sum::<usize>(), best);
        for r in &rings {
            assert!(cycles.iter().any(|(a, _)| a == r));
        }
    }

    #[test]
    fn cubane_count_and_independence() {
        let g = parse_smiles("C12C3C4C1C5C2C3C45").unwrap();
        let rings = find_sssr(&g);
        assert_eq!(rings.len(), g.num_bonds() - g.num_atoms() + 1);
        assert!(rings.iter().all(|r| r.len() == 4));
        let sets: Vec<Vec<usize>> = rings.iter().map(|r| ring_bonds(&g, r)).collect();
        assert_eq!(rank_gf2(&sets, g.num_bonds()), rings.len());
    }

    #[test]
    fn naphthalene_two_six_rings() {
        let g = parse_smiles("c1ccc2ccccc2c1").unwrap();
        let rings = find_sssr(&g);
        assert_eq!(rings.len(), 2);
        assert!(rings.iter().all(|r| r.len() == 6));
    }
}
