use super::{decompose, JunctionTree};
use crate::error::{Error, Result};
use crate::molgraph::MolGraph;
use std::collections::{BTreeSet, HashMap};

/// Sorted, deduplicated cluster labels with dense ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_labels<I, S>(labels: I) -> Vocabulary
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        let labels: Vec<String> = set.into_iter().collect();
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Vocabulary { labels, index }
    }

    /// One label per line; line number (from 0) is the id.
    pub fn parse(text: &str) -> Result<Vocabulary> {
        let labels: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        let v = Vocabulary::from_labels(labels.iter().copied());
        if v.labels
            .iter()
            .map(String::as_str)
            .ne(labels.iter().copied())
        {
            return Err(Error::Config(
                "vocabulary file must be sorted and free of duplicates".into(),
            ));
        }
        Ok(v)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for l in &self.labels {
            s.push_str(l);
            s.push('\n');
        }
        s
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

/// Union of cluster labels over the corpus. Errors carry the 1-based
/// position of the offending molecule.
pub fn build_vocabulary(corpus: &[MolGraph]) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut labels = BTreeSet::new();
    for (i, g) in corpus.iter().enumerate() {
        let t = decompose(g).map_err(|e| e.at_line(i + 1))?;
        labels.extend(t.nodes.into_iter().map(|c| c.label));
    }
    Ok(Vocabulary::from_labels(labels))
}

/// Vocabulary id of every tree node.
pub fn assign_labels(t: &JunctionTree, v: &Vocabulary) -> Result<Vec<usize>> {
    t.nodes
        .iter()
        .map(|c| {
            v.id(&c.label)
                .ok_or_else(|| Error::OovCluster(c.label.clone()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn mols(s: &[&str]) -> Vec<MolGraph> {
        s.iter().map(|x| parse_smiles(x).unwrap()).collect()
    }

    #[test]
    fn ethanol_two_labels() {
        let v = build_vocabulary(&mols(&["CCO"])).unwrap();
        assert_eq!(v.labels(), ["CC", "CO"]);
    }

    #[test]
    fn union_of_decompositions() {
        let v = build_vocabulary(&mols(&["C1CCCCC1", "CCO"])).unwrap();
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn duplicates_do_not_matter() {
        let a = build_vocabulary(&mols(&["CCO", "CCO", "c1ccccc1"])).unwrap();
        let b = build_vocabulary(&mols(&["CCO", "c1ccccc1"])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oov_reported() {
        let v = build_vocabulary(&mols(&["CCO"])).unwrap();
        let t = decompose(&parse_smiles("c1ccccc1").unwrap()).unwrap();
        assert!(matches!(assign_labels(&t, &v), Err(Error::OovCluster(_))));
    }

    #[test]
    fn self_coverage_and_text_round_trip() {
        let corpus = mols(&["Cc1ccccc1", "CC(C)C", "C1CC2CCC1C2"]);
        let v = build_vocabulary(&corpus).unwrap();
        for g in &corpus {
            assign_labels(&decompose(g).unwrap(), &v).unwrap();
        }
        assert_eq!(Vocabulary::parse(&v.to_text()).unwrap(), v);
    }
}
