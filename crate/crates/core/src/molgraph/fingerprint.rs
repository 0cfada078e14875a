//! Morgan-style circular fingerprints and Tanimoto similarity.

use super::{write_canonical_colored, MolGraph};
use std::collections::BTreeSet;

/// Sparse set of 32-bit environment hashes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fingerprint {
    pub bits: BTreeSet<u32>,
}

impl Fingerprint {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

impl FromIterator<u32> for Fingerprint {
    fn from_iter<T: IntoIterator<Item = u32>>(iter: T) -> Self {
        Fingerprint {
            bits: iter.into_iter().collect(),
        }
    }
}

pub fn fnv1a64(data: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &byte in data {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// 64-bit FNV-1a of `data`, truncated to its low 32 bits.
pub fn fnv1a32(data: &[u8]) -> u32 {
    fnv1a64(data) as u32
}

/// Hashes, for every atom and every r in 0..=radius, the canonical string of
/// the induced r-ball with the center atom marked.
pub fn morgan_fingerprint(g: &MolGraph, radius: usize) -> Fingerprint {
    let mut bits = BTreeSet::new();
    for center in 0..g.num_atoms() {
        let mut previous: Option<Vec<usize>> = None;
        for r in 0..=radius {
            let ball = g.ball(center, r);
            if previous.as_ref() == Some(&ball) {
                // saturated: larger radii give the same environment
                break;
            }
            let sub = g.induced_subgraph(&ball);
            let colors: Vec<u32> = ball.iter().map(|&a| u32::from(a == center)).collect();
            bits.insert(fnv1a32(write_canonical_colored(&sub, &colors).as_bytes()));
            previous = Some(ball);
        }
    }
    Fingerprint { bits }
}

/// |a ∩ b| / |a ∪ b|, with two empty sets counting as identical.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> f64 {
    let inter = a.bits.intersection(&b.bits).count();
    let union = a.bits.len() + b.bits.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    #[test]
    fn fnv_known_values() {
        // low halves of the published 64-bit FNV-1a test vectors
        assert_eq!(fnv1a32(b""), 0x8422_2325);
        assert_eq!(fnv1a32(b"a"), 0x8601_ec8c);
    }

    #[test]
    fn radius_zero_on_ethanol() {
        let fp = morgan_fingerprint(&parse_smiles("CCO").unwrap(), 0);
        assert_eq!(fp.len(), 2);
    }

    #[test]
    fn isomorphic_inputs_same_bits() {
        let a = morgan_fingerprint(&parse_smiles("CCO").unwrap(), 2);
        let b = morgan_fingerprint(&parse_smiles("OCC").unwrap(), 2);
        assert_eq!(a, b);
    }

    #[test]
    fn tanimoto_definition() {
        let a: Fingerprint = [1, 2, 3, 4, 5].into_iter().collect();
        let b: Fingerprint = [4, 5, 6, 7, 8].into_iter().collect();
        assert_eq!(tanimoto(&a, &a), 1.0);
        assert!((tanimoto(&a, &b) - 0.25).abs() < 1e-12);
        let c: Fingerprint = [9].into_iter().collect();
        assert_eq!(tanimoto(&a, &c), 0.0);
        assert_eq!(
            tanimoto(&Fingerprint::default(), &Fingerprint::default()),
            1.0
        );
    }
}
