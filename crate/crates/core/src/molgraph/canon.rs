//! Canonical labeling and SMILES emission.
//!
//! Atoms are partitioned by iterative neighborhood refinement (element,
//! charge, aromatic flag, degree and bond-order multiset, then neighbor
//! classes). Remaining ties are broken by individualizing each member of the
//! first non-singleton class in turn and refining again; every discrete
//! ordering reached this way is emitted as SMILES and the lexicographically
//! smallest string wins. Members that are interchangeable twins (identical
//! neighborhoods) or lie in one orbit of automorphisms found so far are
//! explored only once.

use super::{Atom, BondOrder, MolGraph};

/// Canonical SMILES of a (connected or not) graph.
pub fn write_canonical(g: &MolGraph) -> String {
    search(g, None).0
}

/// Canonical string where atoms additionally carry caller-supplied colors.
/// Colors take part in refinement and are written after each atom as
/// `{color}`, so two colored graphs get the same string iff there is a
/// color-preserving isomorphism between them. The output is a key, not SMILES.
pub fn write_canonical_colored(g: &MolGraph, colors: &[u32]) -> String {
    assert_eq!(colors.len(), g.num_atoms());
    search(g, Some(colors)).0
}

/// Canonical rank of every atom (0 = first atom of the canonical string).
pub fn canonical_ranking(g: &MolGraph) -> Vec<usize> {
    search(g, None).1
}

fn search(g: &MolGraph, colors: Option<&[u32]>) -> (String, Vec<usize>) {
    let n = g.num_atoms();
    if n == 0 {
        return (String::new(), Vec::new());
    }
    let initial = initial_classes(g, colors);
    let ranks = refine(g, initial);
    let mut s = Search {
        g,
        colors,
        first: None,
        best: None,
        autos: Vec::new(),
        path: Vec::new(),
    };
    s.explore(ranks);
    let best = s.best.expect("at least one leaf");
    (best.string, best.ranks)
}

struct Leaf {
    string: String,
    ranks: Vec<usize>,
    path: Vec<usize>,
}

/// Individualization search. Two leaves with equal strings yield a verified
/// automorphism; members of a cell in one orbit of the automorphisms fixing
/// the current path are explored once, and a leaf equivalent to an earlier
/// one abandons the branch back to where their paths diverge.
struct Search<'a> {
    g: &'a MolGraph,
    colors: Option<&'a [u32]>,
    first: Option<Leaf>,
    best: Option<Leaf>,
    autos: Vec<Vec<usize>>,
    path: Vec<usize>,
}

impl Search<'_> {
    /// Returns the depth to resume at when the branch turned out redundant.
    fn explore(&mut self, ranks: Vec<usize>) -> Option<usize> {
        let n = ranks.len();
        let mut counts = vec![0usize; n];
        for &r in &ranks {
            counts[r] += 1;
        }
        let Some(target) = (0..n).find(|&r| counts[r] > 1) else {
            return self.leaf(ranks);
        };
        let depth = self.path.len();
        let members: Vec<usize> = (0..n).filter(|&i| ranks[i] == target).collect();
        let mut seen_keys: Vec<Vec<(usize, BondOrder)>> = Vec::new();
        let mut explored: Vec<usize> = Vec::new();
        for &m in &members {
            let key = twin_key(self.g, m);
            if seen_keys.contains(&key) {
                continue;
            }
            if !explored.is_empty() {
                let orbit = self.stabilizer_orbits(n);
                if explored.iter().any(|&e| orbit[e] == orbit[m]) {
                    continue;
                }
            }
            seen_keys.push(key);
            explored.push(m);
            let next: Vec<usize> = ranks
                .iter()
                .enumerate()
                .map(|(i, &r)| if i == m { 2 * r } else { 2 * r + 1 })
                .collect();
            self.path.push(m);
            let jump = self.explore(refine(self.g, next));
            self.path.pop();
            if let Some(d) = jump {
                if d < depth {
                    return Some(d);
                }
            }
        }
        None
    }

    fn leaf(&mut self, ranks: Vec<usize>) -> Option<usize> {
        let string = emit(self.g, &ranks, self.colors);
        let leaf = Leaf {
            string,
            ranks,
            path: self.path.clone(),
        };
        for known in [&self.first, &self.best].into_iter().flatten() {
            if known.string != leaf.string {
                continue;
            }
            let mut atom_at = vec![0; leaf.ranks.len()];
            for (i, &r) in leaf.ranks.iter().enumerate() {
                atom_at[r] = i;
            }
            let gamma: Vec<usize> = known.ranks.iter().map(|&r| atom_at[r]).collect();
            if is_automorphism(self.g, self.colors, &gamma) {
                let common = known
                    .path
                    .iter()
                    .zip(&leaf.path)
                    .take_while(|(a, b)| a == b)
                    .count();
                self.autos.push(gamma);
                return Some(common);
            }
        }
        if self.best.as_ref().is_none_or(|b| leaf.string < b.string) {
            if self.first.is_none() {
                self.first = Some(Leaf {
                    string: leaf.string.clone(),
                    ranks: leaf.ranks.clone(),
                    path: leaf.path.clone(),
                });
            }
            self.best = Some(leaf);
        }
        None
    }

    /// Orbit representative of every atom under the known automorphisms
    /// that fix each individualized atom of the current path.
    fn stabilizer_orbits(&self, n: usize) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for gamma in &self.autos {
            if self.path.iter().any(|&v| gamma[v] != v) {
                continue;
            }
            for (x, &y) in gamma.iter().enumerate() {
                let (a, b) = (find(&mut parent, x), find(&mut parent, y));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        (0..n).map(|x| find(&mut parent, x)).collect()
    }
}

fn is_automorphism(g: &MolGraph, colors: Option<&[u32]>, gamma: &[usize]) -> bool {
    let atoms_kept = (0..g.num_atoms()).all(|i| {
        g.atom(i) == g.atom(gamma[i])
            && g.degree(i) == g.degree(gamma[i])
            && colors.is_none_or(|c| c[i] == c[gamma[i]])
    });
    atoms_kept
        && g.bonds().iter().all(|b| {
            g.neighbors(gamma[b.a])
                .iter()
                .any(|&(x, bi)| x == gamma[b.b] && g.bonds()[bi].order == b.order)
        })
}

/// Sorted (neighbor, order) list; equal keys mean the two atoms can be
/// swapped by an automorphism (given equal classes).
fn twin_key(g: &MolGraph, a: usize) -> Vec<(usize, BondOrder)> {
    let mut k: Vec<(usize, BondOrder)> = g
        .neighbors(a)
        .iter()
        .map(|&(x, bi)| (x, g.bonds()[bi].order))
        .collect();
    k.sort();
    k
}

fn initial_classes(g: &MolGraph, colors: Option<&[u32]>) -> Vec<usize> {
    let keys: Vec<(u32, Atom, usize, Vec<BondOrder>)> = (0..g.num_atoms())
        .map(|i| {
            let mut orders: Vec<BondOrder> = g
                .neighbors(i)
                .iter()
                .map(|&(_, bi)| g.bonds()[bi].order)
                .collect();
            orders.sort();
            (colors.map_or(0, |c| c[i]), *g.atom(i), g.degree(i), orders)
        })
        .collect();
    dense_ranks(&keys)
}

fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect()
}

/// Refines a class assignment until the number of classes stops growing.
/// Relative order of existing classes is preserved.
pub(crate) fn refine(g: &MolGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    ranks = dense_ranks(&ranks);
    let mut num = count_classes(&ranks);
    loop {
        let sigs: Vec<(usize, Vec<(usize, BondOrder)>)> = (0..g.num_atoms())
            .map(|i| {
                let mut nb: Vec<(usize, BondOrder)> = g
                    .neighbors(i)
                    .iter()
                    .map(|&(x, bi)| (ranks[x], g.bonds()[bi].order))
                    .collect();
                nb.sort();
                (ranks[i], nb)
            })
            .collect();
        let next = dense_ranks(&sigs);
        let next_num = count_classes(&next);
        ranks = next;
        if next_num == num {
            return ranks;
        }
        num = next_num;
    }
}

fn count_classes(r: &[usize]) -> usize {
    r.iter().copied().max().map_or(0, |m| m + 1)
}

fn atom_symbol(a: &Atom) -> String {
    let sym = if a.aromatic {
        a.element.symbol().to_ascii_lowercase()
    } else {
        a.element.symbol().to_string()
    };
    if a.charge == 0 {
        return sym;
    }
    let charge = match a.charge {
        1 => "+".to_string(),
        -1 => "-".to_string(),
        c if c > 0 => format!("+{c}"),
        c => format!("-{}", -c),
    };
    format!("[{sym}{charge}]")
}

fn bond_symbol(g: &MolGraph, bi: usize, bridges: &[bool]) -> &'static str {
    let b = g.bonds()[bi];
    let both_aromatic = g.atom(b.a).aromatic && g.atom(b.b).aromatic;
    match b.order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic && !bridges[bi] => "",
        BondOrder::Aromatic => ":",
    }
}

struct Emitter<'a> {
    g: &'a MolGraph,
    ranks: &'a [usize],
    colors: Option<&'a [u32]>,
    bridges: Vec<bool>,
    visited: Vec<bool>,
    bond_used: Vec<bool>,
    children: Vec<Vec<(usize, usize)>>,
    /// Ring bonds opened at an atom: (bond, closer).
    opens: Vec<Vec<(usize, usize)>>,
    /// Ring bonds closed at an atom, in discovery order.
    closes: Vec<Vec<usize>>,
    digit_of_bond: Vec<Option<u32>>,
    free_digits: Vec<bool>,
    out: String,
}

fn emit(g: &MolGraph, ranks: &[usize], colors: Option<&[u32]>) -> String {
    let n = g.num_atoms();
    let mut e = Emitter {
        g,
        ranks,
        colors,
        bridges: g.bridges(),
        visited: vec![false; n],
        bond_used: vec![false; g.num_bonds()],
        children: vec![Vec::new(); n],
        opens: vec![Vec::new(); n],
        closes: vec![Vec::new(); n],
        digit_of_bond: vec![None; g.num_bonds()],
        free_digits: vec![true; 100],
        out: String::new(),
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| ranks[i]);
    let mut first = true;
    for &start in &order {
        if e.visited[start] {
            continue;
        }
        e.plan(start);
        if !first {
            e.out.push('.');
        }
        first = false;
        e.write(start);
    }
    e.out
}

impl Emitter<'_> {
    fn sorted_neighbors(&self, v: usize) -> Vec<(usize, usize)> {
        let mut nb = self.g.neighbors(v).to_vec();
        nb.sort_by_key(|&(x, _)| self.ranks[x]);
        nb
    }

    /// Assigns DFS tree children and ring-closure bonds.
    fn plan(&mut self, v: usize) {
        self.visited[v] = true;
        for (w, bi) in self.sorted_neighbors(v) {
            if self.bond_used[bi] {
                continue;
            }
            self.bond_used[bi] = true;
            if self.visited[w] {
                // back edge to an ancestor: opened there, closed here
                self.opens[w].push((bi, v));
                self.closes[v].push(bi);
            } else {
                self.children[v].push((w, bi));
                self.plan(w);
            }
        }
    }

    fn write(&mut self, v: usize) {
        self.out.push_str(&atom_symbol(self.g.atom(v)));
        if let Some(c) = self.colors {
            self.out.push_str(&format!("{{{}}}", c[v]));
        }
        let closes = std::mem::take(&mut self.closes[v]);
        for bi in closes {
            let d = self.digit_of_bond[bi].expect("ring bond opened before closing");
            self.free_digits[d as usize] = true;
            self.push_digit(d);
        }
        let mut opens = std::mem::take(&mut self.opens[v]);
        opens.sort_by_key(|&(_, closer)| self.ranks[closer]);
        for (bi, _) in opens {
            let d = (1..100u32)
                .find(|&d| self.free_digits[d as usize])
                .expect("fewer than 100 open rings");
            self.free_digits[d as usize] = false;
            self.digit_of_bond[bi] = Some(d);
            let sym = bond_symbol(self.g, bi, &self.bridges);
            self.out.push_str(sym);
            self.push_digit(d);
        }
        let children = std::mem::take(&mut self.children[v]);
        let last = children.len().saturating_sub(1);
        for (k, (w, bi)) in children.into_iter().enumerate() {
            let branch = k != last;
            if branch {
                self.out.push('(');
            }
            let sym = bond_symbol(self.g, bi, &self.bridges);
            self.out.push_str(sym);
            self.write(w);
            if branch {
                self.out.push(')');
            }
        }
    }

    fn push_digit(&mut self, d: u32) {
        if d < 10 {
            self.out.push(char::from(b'0' + d as u8));
        } else {
            self.out.push_str(&format!("%{d:02}"));
        }
    }
}
