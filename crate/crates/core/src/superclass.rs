use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};

/// The sixteen entry-level categories used by the OOD benchmark.
pub const DEFAULT_SUPERCLASSES: [&str; 16] = [
    "airplane", "bear", "bicycle", "bird", "boat", "bottle", "car", "cat", "chair", "clock", "dog",
    "elephant", "keyboard", "knife", "oven", "truck",
];

/// The configured category vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperclassSet {
    names: Vec<String>,
    lookup: BTreeSet<String>,
}

impl Default for SuperclassSet {
    fn default() -> Self {
        Self::new(DEFAULT_SUPERCLASSES.iter().map(|s| s.to_string())).unwrap()
    }
}

impl SuperclassSet {
    pub fn new(names: impl IntoIterator<Item = String>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(|s| s.trim().to_string()).collect();
        let lookup: BTreeSet<String> = names.iter().cloned().collect();
        if lookup.len() != names.len() {
            return Err(Error::Config("duplicate superclass names".into()));
        }
        if names.iter().any(String::is_empty) {
            return Err(Error::Config("empty superclass name".into()));
        }
        if names.len() < 2 {
            return Err(Error::Config("need at least two superclasses".into()));
        }
        Ok(Self { names, lookup })
    }

    /// One name per non-empty line; `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::new(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim().to_string())
                .filter(|l| !l.is_empty()),
        )
    }

    pub fn contains(&self, name: &str) -> bool {
        self.lookup.contains(name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Forced-choice guessing rate.
    pub fn chance_level(&self) -> f64 {
        1.0 / self.names.len() as f64
    }
}
