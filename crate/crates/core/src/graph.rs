//! Undirected simple graph with a mutable edge set.
//!
//! Each node keeps its neighbors in a dense vector for uniform sampling. Membership
//! is a scan while the degree is small and a hash lookup once it is not, so sampling,
//! membership, insertion and removal cost O(1) expected independent of the node count.

use std::fmt;
use std::io::{self, BufRead, Write};

use rand::distr::{Bernoulli, Distribution};
use rand::Rng;
use rustc_hash::FxHashMap;
use thiserror::Error;

pub type NodeId = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid graph parameter: {0}")]
    InvalidParameter(String),
    #[error("edge {0}-{1} does not exist")]
    MissingEdge(NodeId, NodeId),
    #[error("edge {0}-{1} already exists")]
    EdgeExists(NodeId, NodeId),
    #[error("self-loop on node {0} is not allowed")]
    SelfLoop(NodeId),
    #[error("node {0} is out of range for a graph of {1} nodes")]
    NodeOutOfRange(NodeId, usize),
    #[error("malformed edge list at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Neighbors stored inside the node record itself.
const INLINE: usize = 29;

/// A set of node ids supporting O(1) sampling.
///
/// A node record is one 128-byte block: up to `INLINE` neighbors live in the
/// block and membership is a short scan, so a typical step touches a single
/// record. Larger sets spill to a heap vector with a position index, and move
/// back once they shrink to half the inline capacity. Either way the item order
/// evolves identically (push on insert, swap-remove on removal), so sampling
/// never depends on where the items are stored.
#[derive(Debug, Clone)]
#[repr(C, align(128))]
struct NeighborSet {
    len: u32,
    inline: [NodeId; INLINE],
    spill: Option<Box<Spill>>,
}

#[derive(Debug, Clone, Default)]
struct Spill {
    items: Vec<NodeId>,
    index: FxHashMap<NodeId, u32>,
}

impl Default for NeighborSet {
    fn default() -> Self {
        NeighborSet {
            len: 0,
            inline: [0; INLINE],
            spill: None,
        }
    }
}

impl NeighborSet {
    fn len(&self) -> usize {
        self.len as usize
    }

    fn items(&self) -> &[NodeId] {
        match &self.spill {
            Some(spill) => &spill.items,
            None => &self.inline[..self.len as usize],
        }
    }

    fn position(&self, v: NodeId) -> Option<usize> {
        match &self.spill {
            Some(spill) => spill.index.get(&v).map(|&p| p as usize),
            None => self.items().iter().position(|&x| x == v),
        }
    }

    fn contains(&self, v: NodeId) -> bool {
        self.position(v).is_some()
    }

    fn insert(&mut self, v: NodeId) -> bool {
        if self.contains(v) {
            return false;
        }
        let len = self.len as usize;
        match &mut self.spill {
            Some(spill) => {
                spill.index.insert(v, len as u32);
                spill.items.push(v);
            }
            None if len < INLINE => self.inline[len] = v,
            None => {
                let mut items = self.inline.to_vec();
                items.push(v);
                let index = items.iter().enumerate().map(|(i, &x)| (x, i as u32)).collect();
                self.spill = Some(Box::new(Spill { items, index }));
            }
        }
        self.len += 1;
        true
    }

    fn remove(&mut self, v: NodeId) -> bool {
        let Some(pos) = self.position(v) else {
            return false;
        };
        let last = self.len as usize - 1;
        match &mut self.spill {
            Some(spill) => {
                spill.items.swap_remove(pos);
                spill.index.remove(&v);
                if let Some(&moved) = spill.items.get(pos) {
                    spill.index.insert(moved, pos as u32);
                }
                if last <= INLINE / 2 {
                    self.inline[..last].copy_from_slice(&spill.items);
                    self.spill = None;
                }
            }
            None => self.inline[pos] = self.inline[last],
        }
        self.len -= 1;
        true
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<NodeId> {
        match self.len {
            0 => None,
            len => Some(self.items()[rng.random_range(0..len) as usize]),
        }
    }

    fn check(&self) -> Result<(), String> {
        let items = self.items();
        if items.len() != self.len as usize {
            return Err("length and item list disagree".into());
        }
        for (pos, &v) in items.iter().enumerate() {
            if items[..pos].contains(&v) {
                return Err(format!("duplicate neighbor {v}"));
            }
        }
        if let Some(spill) = &self.spill {
            if spill.index.len() != items.len() {
                return Err("index and item list disagree".into());
            }
            for (pos, &v) in items.iter().enumerate() {
                if spill.index.get(&v) != Some(&(pos as u32)) {
                    return Err(format!("stale index for neighbor {v}"));
                }
            }
        }
        Ok(())
    }
}

/// Undirected simple graph on nodes `0..node_count`.
#[derive(Debug, Clone)]
pub struct AdaptiveGraph {
    adjacency: Vec<NeighborSet>,
    edge_count: usize,
}

impl AdaptiveGraph {
    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        AdaptiveGraph {
            adjacency: vec![NeighborSet::default(); n],
            edge_count: 0,
        }
    }

    /// G(n, p) random graph with p = `k_avg / (n - 1)`: every unordered pair is
    /// linked by an independent coin flip. Pairs are visited in the order
    /// (0,1), (0,2), ..., (0,n-1), (1,2), ...
    pub fn erdos_renyi<R: Rng + ?Sized>(
        n: usize,
        k_avg: f64,
        rng: &mut R,
    ) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::InvalidParameter(format!(
                "n must be at least 2, got {n}"
            )));
        }
        if !(0.0..=(n - 1) as f64).contains(&k_avg) {
            return Err(GraphError::InvalidParameter(format!(
                "k_avg must be in [0, {}], got {k_avg}",
                n - 1
            )));
        }
        let coin = Bernoulli::new(k_avg / (n - 1) as f64)
            .map_err(|e| GraphError::InvalidParameter(e.to_string()))?;
        let mut g = AdaptiveGraph::empty(n);
        for u in 0..n as NodeId {
            for v in (u + 1)..n as NodeId {
                if coin.sample(rng) {
                    g.link(u, v);
                }
            }
        }
        Ok(g)
    }

    /// Builds a graph from an edge list, rejecting loops, duplicates and
    /// out-of-range ids.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut g = AdaptiveGraph::empty(n);
        for (u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency[v as usize].len()
    }

    /// Neighbors of `v` in internal (sampling) order.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        self.adjacency[v as usize].items()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency
            .get(u as usize)
            .is_some_and(|set| set.contains(v))
    }

    /// Uniformly random node.
    pub fn random_node<R: Rng + ?Sized>(&self, rng: &mut R) -> NodeId {
        rng.random_range(0..self.adjacency.len() as NodeId)
    }

    /// Uniformly random neighbor of `v`, or `None` if `v` is isolated.
    pub fn random_neighbor<R: Rng + ?Sized>(&self, v: NodeId, rng: &mut R) -> Option<NodeId> {
        self.adjacency[v as usize].sample(rng)
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId) -> Result<(), GraphError> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        if self.has_edge(u, v) {
            return Err(GraphError::EdgeExists(u.min(v), u.max(v)));
        }
        self.link(u, v);
        Ok(())
    }

    pub fn remove_edge(&mut self, u: NodeId, v: NodeId) -> Result<(), GraphError> {
        self.check_node(u)?;
        self.check_node(v)?;
        if !self.adjacency[u as usize].remove(v) {
            return Err(GraphError::MissingEdge(u.min(v), u.max(v)));
        }
        self.adjacency[v as usize].remove(u);
        self.edge_count -= 1;
        Ok(())
    }

    /// Moves edge `{a, old}` to `{a, new}`. The graph is left untouched on error.
    pub fn rewire_edge(&mut self, a: NodeId, old: NodeId, new: NodeId) -> Result<(), GraphError> {
        self.check_node(a)?;
        self.check_node(old)?;
        self.check_node(new)?;
        if new == a {
            return Err(GraphError::SelfLoop(a));
        }
        if !self.has_edge(a, old) {
            return Err(GraphError::MissingEdge(a.min(old), a.max(old)));
        }
        if self.has_edge(a, new) {
            return Err(GraphError::EdgeExists(a.min(new), a.max(new)));
        }
        self.adjacency[a as usize].remove(old);
        self.adjacency[old as usize].remove(a);
        self.link(a, new);
        self.edge_count -= 1;
        Ok(())
    }

    /// All edges as `(u, v)` with `u < v`, sorted ascending.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (u, set) in self.adjacency.iter().enumerate() {
            let u = u as NodeId;
            let start = out.len();
            out.extend(set.items().iter().filter(|&&v| v > u).map(|&v| (u, v)));
            out[start..].sort_unstable();
        }
        out
    }

    /// Writes the canonical edge list: one `u v` line per edge, `u < v`, sorted.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}")?;
        }
        Ok(())
    }

    /// Parses an edge list written by [`AdaptiveGraph::write_edge_list`].
    pub fn read_edge_list<R: BufRead>(n: usize, input: R) -> Result<Self, GraphError> {
        let mut g = AdaptiveGraph::empty(n);
        for (idx, line) in input.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| GraphError::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let mut id = || -> Result<NodeId, GraphError> {
                parts
                    .next()
                    .ok_or_else(|| GraphError::Parse {
                        line: line_no,
                        reason: "expected two node ids".into(),
                    })?
                    .parse()
                    .map_err(|e| GraphError::Parse {
                        line: line_no,
                        reason: format!("{e}"),
                    })
            };
            let (u, v) = (id()?, id()?);
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Checks every structural invariant; used by tests and debug assertions.
    pub fn validate(&self) -> Result<(), String> {
        let mut degree_sum = 0usize;
        for (u, set) in self.adjacency.iter().enumerate() {
            let u = u as NodeId;
            set.check().map_err(|e| format!("node {u}: {e}"))?;
            for &v in set.items() {
                if v == u {
                    return Err(format!("self-loop on {u}"));
                }
                if !self.has_edge(v, u) {
                    return Err(format!("asymmetric edge {u}->{v}"));
                }
            }
            degree_sum += set.len();
        }
        if degree_sum != 2 * self.edge_count {
            return Err(format!(
                "edge_count {} but degree sum {degree_sum}",
                self.edge_count
            ));
        }
        Ok(())
    }

    fn link(&mut self, u: NodeId, v: NodeId) {
        self.adjacency[u as usize].insert(v);
        self.adjacency[v as usize].insert(u);
        self.edge_count += 1;
    }

    fn check_node(&self, v: NodeId) -> Result<(), GraphError> {
        if (v as usize) < self.adjacency.len() {
            Ok(())
        } else {
            Err(GraphError::NodeOutOfRange(v, self.adjacency.len()))
        }
    }
}

impl PartialEq for AdaptiveGraph {
    fn eq(&self, other: &Self) -> bool {
        self.node_count() == other.node_count() && self.edges() == other.edges()
    }
}

impl fmt::Display for AdaptiveGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "AdaptiveGraph({} nodes, {} edges)",
            self.node_count(),
            self.edge_count
        )
    }
}
