use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Undirected simple graph over `p` nodes, stored as pairs `(u, v)` with `u < v`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeSet {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl EdgeSet {
    pub fn new(p: usize) -> Self {
        EdgeSet { p, edges: BTreeSet::new() }
    }

    pub fn from_pairs(p: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = EdgeSet::new(p);
        for (u, v) in pairs {
            set.insert(u, v)?;
        }
        Ok(set)
    }

    /// Inserts the unordered pair; returns whether it was new.
    pub fn insert(&mut self, u: usize, v: usize) -> Result<bool> {
        if u == v {
            return Err(Error::InvalidInput(format!("self-loop ({u}, {u})")));
        }
        if u >= self.p || v >= self.p {
            return Err(Error::InvalidInput(format!("edge ({u}, {v}) out of range for p = {}", self.p)));
        }
        Ok(self.edges.insert((u.min(v), u.max(v))))
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.p];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn intersection_len(&self, other: &EdgeSet) -> usize {
        self.edges.intersection(&other.edges).count()
    }

    /// Number of unordered non-edges, `p(p-1)/2 - |E|`.
    pub fn complement_len(&self) -> usize {
        self.p * self.p.saturating_sub(1) / 2 - self.len()
    }
}
