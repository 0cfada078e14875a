//! Oracles shared by the integration and acceptance tests. None of them
//! call the library routine they check.
#![allow(dead_code)]

pub mod composites;
pub mod fd;
pub mod iso;
pub mod oracle;

use jtvae::molgraph::MolGraph;
use jtvae::train::read_corpus;

pub const CORPUS: &str = include_str!("../../data/corpus.smi");
pub const TOY: &str = include_str!("../../data/toy20.smi");

pub fn corpus() -> Vec<MolGraph> {
    read_corpus(CORPUS).expect("bundled corpus parses")
}

pub fn toy() -> Vec<MolGraph> {
    read_corpus(TOY).expect("bundled toy set parses")
}
