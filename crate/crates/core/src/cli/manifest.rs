//! Run manifests: enough to reproduce an output byte for byte.

use crate::molgraph::fnv1a64;
use std::fmt;

/// `key=value` lines in insertion order. Holds no timestamps or paths of
/// outputs, so equal runs write equal manifests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> RunManifest {
        RunManifest {
            entries: vec![
                ("command".into(), command.into()),
                ("tool_version".into(), env!("CARGO_PKG_VERSION").into()),
            ],
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    /// Records an input by the FNV-1a 64 hash of its bytes.
    pub fn input(&mut self, name: &str, bytes: &[u8]) -> &mut Self {
        self.set(&format!("input.{name}"), format!("{:016x}", fnv1a64(bytes)))
    }

    /// Records each `key=value` line of a config under `config.`.
    pub fn config(&mut self, text: &str) -> &mut Self {
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                self.set(&format!("config.{k}"), v);
            }
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for RunManifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}
