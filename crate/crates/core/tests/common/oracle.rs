//! Candidate enumeration by brute force: every combination of per-child
//! attachments, filtered by valence on the merged molecule, then grouped by
//! anchored isomorphism of the neighborhood graph.

use super::iso::brute_isomorphic;
use jtvae::decoder::{Candidate, Neighborhood, Skeleton};
use jtvae::molgraph::{max_valence, Atom, Bond, MolGraph};
use std::collections::HashMap;

/// (child atom, host atom) pairs of each way `child` can share one atom or
/// one bond with `host`. Atoms match on element and charge; bonds also on
/// order, and only between clusters of three or more atoms. Two single
/// atoms never attach.
pub fn attachments(host: &MolGraph, child: &MolGraph) -> Vec<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    if host.num_atoms() == 1 && child.num_atoms() == 1 {
        return out;
    }
    let kind = |a: &Atom| (a.element, a.charge);
    for x in 0..child.num_atoms() {
        for a in 0..host.num_atoms() {
            if kind(child.atom(x)) == kind(host.atom(a)) {
                out.push(vec![(x, a)]);
            }
        }
    }
    if host.num_atoms() >= 3 && child.num_atoms() >= 3 {
        for cb in child.bonds() {
            for hb in host.bonds() {
                for (x, y) in [(cb.a, cb.b), (cb.b, cb.a)] {
                    if cb.order == hb.order
                        && kind(child.atom(x)) == kind(host.atom(hb.a))
                        && kind(child.atom(y)) == kind(host.atom(hb.b))
                    {
                        out.push(vec![(x, hb.a), (y, hb.b)]);
                    }
                }
            }
        }
    }
    out
}

/// A neighborhood graph with its anchoring colors: parent atoms pinned one
/// by one, remaining center atoms 0, and child k's new atoms k + 1.
#[derive(Debug, Clone)]
pub struct Colored {
    pub graph: MolGraph,
    pub colors: Vec<u32>,
}

/// Per child, the skeleton atom of each of its atoms, or a fresh id.
fn global_places(
    skel: &Skeleton,
    nb: &Neighborhood,
    combo: &[&Vec<(usize, usize)>],
) -> Vec<Vec<usize>> {
    let mut fresh = skel.len();
    nb.children
        .iter()
        .zip(combo)
        .map(|((_, frag), pairs)| {
            (0..frag.num_atoms())
                .map(|x| match pairs.iter().find(|&&(cx, _)| cx == x) {
                    Some(&(_, a)) => nb.center.place[a],
                    None => {
                        fresh += 1;
                        fresh - 1
                    }
                })
                .collect()
        })
        .collect()
}

fn within_valence(skel: &Skeleton, nb: &Neighborhood, places: &[Vec<usize>]) -> bool {
    let mut bonds: HashMap<(usize, usize), u32> = skel
        .bonds()
        .map(|(a, b, o)| ((a.min(b), a.max(b)), o.half_units()))
        .collect();
    let mut atoms: HashMap<usize, Atom> = (0..skel.len()).map(|i| (i, skel.atoms()[i])).collect();
    for ((_, frag), place) in nb.children.iter().zip(places) {
        for (x, &g) in place.iter().enumerate() {
            atoms.entry(g).or_insert(*frag.atom(x));
        }
        for b in frag.bonds() {
            let (a, c) = (place[b.a], place[b.b]);
            bonds
                .entry((a.min(c), a.max(c)))
                .or_insert(b.order.half_units());
        }
    }
    let mut half: HashMap<usize, u32> = HashMap::new();
    for (&(a, b), &h) in &bonds {
        *half.entry(a).or_default() += h;
        *half.entry(b).or_default() += h;
    }
    half.iter().all(|(g, &h)| {
        let atom = atoms[g];
        h / 2 <= max_valence(atom.element, atom.charge)
    })
}

fn claims_ok(skel: &Skeleton, nb: &Neighborhood, places: &[Vec<usize>]) -> bool {
    let mut taken = Vec::new();
    for ((_, frag), place) in nb.children.iter().zip(places) {
        if frag.num_atoms() == 1 {
            let g = place[0];
            if skel.is_claimed(g) || taken.contains(&g) {
                return false;
            }
            taken.push(g);
        }
    }
    true
}

fn merged(nb: &Neighborhood, places: &[Vec<usize>]) -> Colored {
    let pin_base = 1 + nb.children.len() as u32;
    let mut local: HashMap<usize, usize> = HashMap::new();
    let mut atoms: Vec<Atom> = Vec::new();
    let mut colors: Vec<u32> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    let mut add = |frag: &MolGraph, place: &[usize], color: &dyn Fn(usize) -> u32| {
        let idx: Vec<usize> = place
            .iter()
            .enumerate()
            .map(|(x, g)| {
                if let Some(&i) = local.get(g) {
                    atoms[i].aromatic |= frag.atom(x).aromatic;
                    i
                } else {
                    local.insert(*g, atoms.len());
                    atoms.push(*frag.atom(x));
                    colors.push(color(x));
                    atoms.len() - 1
                }
            })
            .collect();
        for b in frag.bonds() {
            let (a, c) = (idx[b.a], idx[b.b]);
            if !bonds
                .iter()
                .any(|e| (e.a == a && e.b == c) || (e.a == c && e.b == a))
            {
                bonds.push(Bond::new(a, c, b.order));
            }
        }
    };
    let parent_place: Vec<usize> = nb.parent.as_ref().map_or(Vec::new(), |p| p.place.clone());
    let center = &nb.center;
    add(&center.frag, &center.place, &|x| {
        parent_place
            .iter()
            .position(|&g| g == center.place[x])
            .map_or(0, |j| pin_base + j as u32)
    });
    if let Some(p) = &nb.parent {
        add(&p.frag, &p.place, &|j| pin_base + j as u32);
    }
    for (k, ((_, frag), place)) in nb.children.iter().zip(places).enumerate() {
        add(frag, place, &|_| 1 + k as u32);
    }
    Colored {
        graph: MolGraph::fragment(atoms, bonds).expect("merged neighborhood within valence"),
        colors,
    }
}

/// One representative per class of valid full attachments.
pub fn classes(skel: &Skeleton, nb: &Neighborhood) -> Vec<Colored> {
    let options: Vec<Vec<Vec<(usize, usize)>>> = nb
        .children
        .iter()
        .map(|(_, frag)| attachments(&nb.center.frag, frag))
        .collect();
    let mut out: Vec<Colored> = Vec::new();
    if options.iter().any(Vec::is_empty) {
        return out;
    }
    let mut digits = vec![0usize; options.len()];
    loop {
        let combo: Vec<&Vec<(usize, usize)>> =
            digits.iter().zip(&options).map(|(&d, o)| &o[d]).collect();
        let places = global_places(skel, nb, &combo);
        if claims_ok(skel, nb, &places) && within_valence(skel, nb, &places) {
            let m = merged(nb, &places);
            if !out
                .iter()
                .any(|c| brute_isomorphic(&c.graph, &c.colors, &m.graph, &m.colors))
            {
                out.push(m);
            }
        }
        // odometer over the per-child option lists
        let mut k = 0;
        loop {
            if k == digits.len() {
                return out;
            }
            digits[k] += 1;
            if digits[k] < options[k].len() {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

/// `Ok` iff the candidates and the oracle classes match one to one.
pub fn compare(
    skel: &Skeleton,
    nb: &Neighborhood,
    candidates: &[Candidate],
) -> Result<usize, String> {
    let classes = classes(skel, nb);
    if classes.len() != candidates.len() {
        return Err(format!(
            "node {}: {} candidates, oracle has {} classes",
            nb.center.node,
            candidates.len(),
            classes.len()
        ));
    }
    let mut hit = vec![false; classes.len()];
    for (i, c) in candidates.iter().enumerate() {
        let matches: Vec<usize> = (0..classes.len())
            .filter(|&j| {
                brute_isomorphic(
                    &c.merged.graph,
                    &c.merged.colors,
                    &classes[j].graph,
                    &classes[j].colors,
                )
            })
            .collect();
        match matches.as_slice() {
            [j] if !hit[*j] => hit[*j] = true,
            _ => {
                return Err(format!(
                    "node {}: candidate {i} matches oracle classes {matches:?}",
                    nb.center.node
                ))
            }
        }
    }
    Ok(classes.len())
}
