use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Vector clock over sub-task ids; absent entries read as zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorClock(BTreeMap<String, u64>);

impl VectorClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: &str) -> u64 {
        self.0.get(id).copied().unwrap_or(0)
    }

    pub fn increment(&mut self, id: &str) {
        *self.0.entry(id.to_string()).or_insert(0) += 1;
    }

    /// Component-wise max.
    pub fn merge(&mut self, other: &VectorClock) {
        for (id, &n) in &other.0 {
            let slot = self.0.entry(id.clone()).or_insert(0);
            *slot = (*slot).max(n);
        }
    }

    /// True when every component of `self` is at least the matching
    /// component of `other`.
    pub fn dominates(&self, other: &VectorClock) -> bool {
        other.0.iter().all(|(id, &n)| self.get(id) >= n)
    }

    /// Number of events in the causal past, used as a Lamport-style stamp.
    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl fmt::Display for VectorClock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (id, n)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{id}:{n}")?;
        }
        f.write_str("}")
    }
}
