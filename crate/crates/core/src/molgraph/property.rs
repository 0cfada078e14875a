//! Scalar molecular properties used as optimization targets.

use super::{find_sssr, MolGraph};

pub type PropertyFn = fn(&MolGraph) -> f64;

/// Heavy atoms / 10 minus the number of smallest rings larger than six atoms.
pub fn desk_property(g: &MolGraph) -> f64 {
    let large = find_sssr(g).iter().filter(|r| r.len() > 6).count();
    g.num_atoms() as f64 / 10.0 - large as f64
}

/// Named property functions. `desk` is always registered.
#[derive(Debug, Clone)]
pub struct PropertyRegistry {
    entries: Vec<(String, PropertyFn)>,
}

impl Default for PropertyRegistry {
    fn default() -> Self {
        PropertyRegistry {
            entries: vec![("desk".to_string(), desk_property as PropertyFn)],
        }
    }
}

impl PropertyRegistry {
    /// Adds or replaces a property under `name`.
    pub fn register(&mut self, name: &str, f: PropertyFn) {
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some(entry) => entry.1 = f,
            None => self.entries.push((name.to_string(), f)),
        }
    }

    pub fn get(&self, name: &str) -> Option<PropertyFn> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, f)| f)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn desk_values() {
        assert!(close(desk_property(&parse_smiles("C").unwrap()), 0.1));
        assert!(close(
            desk_property(&parse_smiles("C1CCCCC1").unwrap()),
            0.6
        ));
        assert!(close(
            desk_property(&parse_smiles("C1CCCCCCC1").unwrap()),
            -0.2
        ));
    }

    #[test]
    fn registry_lookup() {
        let mut reg = PropertyRegistry::default();
        assert!(reg.get("desk").is_some());
        reg.register("atoms", |g| g.num_atoms() as f64);
        let f = reg.get("atoms").unwrap();
        assert_eq!(f(&parse_smiles("CCO").unwrap()), 3.0);
        assert_eq!(reg.names().collect::<Vec<_>>(), ["desk", "atoms"]);
    }
}
