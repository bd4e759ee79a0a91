use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::NodeId;

/// Set of undirected edges stored as `(min, max)` pairs.
///
/// Self-loops are not representable; [`EdgeSet::insert`] ignores them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct EdgeSet(BTreeSet<(NodeId, NodeId)>);

impl EdgeSet {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
        if u < v {
            (u, v)
        } else {
            (v, u)
        }
    }

    /// Inserts `{u, v}`. Returns `false` for self-loops and duplicates.
    pub fn insert(&mut self, u: NodeId, v: NodeId) -> bool {
        if u == v {
            return false;
        }
        self.0.insert(Self::key(u, v))
    }

    pub fn contains(&self, u: NodeId, v: NodeId) -> bool {
        u != v && self.0.contains(&Self::key(u, v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Edges in ascending `(u, v)` order with `u < v`.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.0.iter().copied()
    }

    pub fn extend_from(&mut self, other: &EdgeSet) {
        self.0.extend(other.0.iter().copied());
    }

    pub fn union(&self, other: &EdgeSet) -> EdgeSet {
        EdgeSet(self.0.union(&other.0).copied().collect())
    }

    pub fn difference(&self, other: &EdgeSet) -> EdgeSet {
        EdgeSet(self.0.difference(&other.0).copied().collect())
    }
}

impl FromIterator<(NodeId, NodeId)> for EdgeSet {
    fn from_iter<I: IntoIterator<Item = (NodeId, NodeId)>>(iter: I) -> Self {
        let mut set = EdgeSet::new();
        for (u, v) in iter {
            set.insert(u, v);
        }
        set
    }
}

/// Serialized as a sequence of `[u, v]` pairs.
impl Serialize for EdgeSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for EdgeSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pairs = Vec::<(NodeId, NodeId)>::deserialize(d)?;
        Ok(pairs.into_iter().collect())
    }
}

/// `|(a ∖ b) ∪ (b ∖ a)|`.
pub fn edge_symmetric_difference(a: &EdgeSet, b: &EdgeSet) -> usize {
    a.0.symmetric_difference(&b.0).count()
}
