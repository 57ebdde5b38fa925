//! Online connected components over the collapsed undirected graph.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Union-find with union by size and path halving.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSet {
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn make_set(&mut self) -> usize {
        let idx = self.parent.len();
        self.parent.push(idx as u32);
        self.size.push(1);
        idx
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let grand = self.parent[self.parent[x] as usize];
            self.parent[x] = grand;
            x = grand as usize;
        }
        x
    }

    /// Merges the sets of `a` and `b`, returning the size of the merged set.
    pub fn union(&mut self, a: usize, b: usize) -> u32 {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return self.size[a];
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a as u32;
        self.size[a] += self.size[b];
        self.size[a]
    }

    pub fn set_size(&mut self, x: usize) -> u32 {
        let root = self.find(x);
        self.size[root]
    }
}

/// Tracks the distinct undirected user pairs and the component sizes of a
/// growing graph. Nodes and edges are never removed, so the union-find stays
/// exact.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentTracker {
    #[serde(with = "crate::serde_util::map_as_pairs")]
    slots: BTreeMap<u64, u32>,
    sets: DisjointSet,
    pairs: BTreeSet<(u64, u64)>,
    largest: u32,
}

impl ComponentTracker {
    fn slot(&mut self, node: u64) -> usize {
        if let Some(&s) = self.slots.get(&node) {
            return s as usize;
        }
        let s = self.sets.make_set();
        self.slots.insert(node, s as u32);
        self.largest = self.largest.max(1);
        s
    }

    pub fn add_node(&mut self, node: u64) {
        self.slot(node);
    }

    /// Records an undirected edge. Self-loops only register the node.
    pub fn add_edge(&mut self, a: u64, b: u64) {
        let (sa, sb) = (self.slot(a), self.slot(b));
        if a == b {
            return;
        }
        let pair = (a.min(b), a.max(b));
        if self.pairs.insert(pair) {
            let merged = self.sets.union(sa, sb);
            self.largest = self.largest.max(merged);
        }
    }

    pub fn node_count(&self) -> usize {
        self.slots.len()
    }

    /// Number of distinct undirected, non-loop node pairs.
    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn largest_component(&self) -> usize {
        self.largest as usize
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn component_size(&mut self, node: u64) -> Option<usize> {
        let s = *self.slots.get(&node)? as usize;
        Some(self.sets.set_size(s) as usize)
    }
}
