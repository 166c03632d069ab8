//! Immutable undirected graphs and the traversal primitives everything else
//! is built on.
//!
//! Vertex ids are dense and 0-based; adjacency is CSR with sorted neighbor
//! lists. A [`Graph`] is immutable after construction and safe to share
//! across threads; BFS from distinct sources may run concurrently since
//! each call owns its scratch space.

use std::collections::HashMap;
use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Immutable undirected simple graph, optionally edge-weighted.
///
/// Invariants (enforced at construction): no self-loops, no duplicate
/// edges, symmetric sorted neighbor lists, strictly positive weights.
/// Weights are stored but ignored by every unweighted operation.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    /// Weight aligned with `neighbors`; present only for weighted graphs.
    neighbor_weights: Option<Vec<f64>>,
    /// Canonical edge list, u < v, lexicographically sorted.
    edges: Vec<(u32, u32)>,
    edge_weights: Option<Vec<f64>>,
}

/// Sorted list of distinct vertex ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexSet {
    ids: Vec<u32>,
}

impl VertexSet {
    pub fn new(mut ids: Vec<u32>, n: usize) -> Result<Self> {
        ids.sort_unstable();
        for w in ids.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidParams(format!("duplicate vertex {}", w[0])));
            }
        }
        if let Some(&last) = ids.last() {
            if last as usize >= n {
                return Err(Error::VertexOutOfRange { vertex: last as usize, n });
            }
        }
        Ok(VertexSet { ids })
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, v: u32) -> bool {
        self.ids.binary_search(&v).is_ok()
    }
}

/// Result of taking an induced subgraph: the graph plus both vertex maps.
#[derive(Debug, Clone)]
pub struct InducedSubgraph {
    pub graph: Graph,
    /// `old_to_new[v]` is `None` when `v` was dropped.
    pub old_to_new: Vec<Option<u32>>,
    pub new_to_old: Vec<u32>,
}

/// Diameter value, flagged when it is only a double-sweep lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Diameter {
    pub value: usize,
    pub exact: bool,
}

/// Above this size the diameter falls back to an iterated double-sweep
/// lower bound instead of all-sources BFS.
pub const EXACT_DIAMETER_LIMIT: usize = 50_000;

impl Graph {
    /// Build a graph from an unweighted edge list.
    pub fn build(n: usize, edges: &[(usize, usize)]) -> Result<Graph> {
        let withw: Vec<(usize, usize, f64)> = edges.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        Self::build_inner(n, &withw, false)
    }

    /// Build a graph from a weighted edge list. Weights must be positive.
    pub fn build_weighted(n: usize, edges: &[(usize, usize, f64)]) -> Result<Graph> {
        Self::build_inner(n, edges, true)
    }

    fn build_inner(n: usize, edges: &[(usize, usize, f64)], weighted: bool) -> Result<Graph> {
        let mut canon: Vec<(u32, u32, f64)> = Vec::with_capacity(edges.len());
        for &(u, v, w) in edges {
            if u >= n {
                return Err(Error::VertexOutOfRange { vertex: u, n });
            }
            if v >= n {
                return Err(Error::VertexOutOfRange { vertex: v, n });
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            if weighted && !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "edge ({u}, {v}) has non-positive weight {w}"
                )));
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            canon.push((a as u32, b as u32, w));
        }
        canon.sort_unstable_by_key(|&(a, b, _)| (a, b));
        for win in canon.windows(2) {
            if win[0].0 == win[1].0 && win[0].1 == win[1].1 {
                return Err(Error::DuplicateEdge(win[0].0 as usize, win[0].1 as usize));
            }
        }

        let mut degree = vec![0usize; n];
        for &(a, b, _) in &canon {
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0usize);
        for v in 0..n {
            offsets.push(offsets[v] + degree[v]);
        }
        let m2 = offsets[n];
        let mut neighbors = vec![0u32; m2];
        let mut weights = if weighted { vec![0.0f64; m2] } else { Vec::new() };
        let mut cursor = offsets.clone();
        for &(a, b, w) in &canon {
            neighbors[cursor[a as usize]] = b;
            neighbors[cursor[b as usize]] = a;
            if weighted {
                weights[cursor[a as usize]] = w;
                weights[cursor[b as usize]] = w;
            }
            cursor[a as usize] += 1;
            cursor[b as usize] += 1;
        }
        // Neighbor lists come out sorted because the canonical edge list is
        // sorted on (min, max); the min endpoint receives increasing max
        // endpoints, but the max endpoint receives min endpoints in
        // arbitrary relative order, so sort per vertex.
        for v in 0..n {
            let lo = offsets[v];
            let hi = offsets[v + 1];
            if weighted {
                let mut pairs: Vec<(u32, f64)> = neighbors[lo..hi]
                    .iter()
                    .copied()
                    .zip(weights[lo..hi].iter().copied())
                    .collect();
                pairs.sort_unstable_by_key(|&(u, _)| u);
                for (i, (u, w)) in pairs.into_iter().enumerate() {
                    neighbors[lo + i] = u;
                    weights[lo + i] = w;
                }
            } else {
                neighbors[lo..hi].sort_unstable();
            }
        }

        let edge_weights = if weighted {
            Some(canon.iter().map(|&(_, _, w)| w).collect())
        } else {
            None
        };
        Ok(Graph {
            n,
            offsets,
            neighbors,
            neighbor_weights: if weighted { Some(weights) } else { None },
            edges: canon.iter().map(|&(a, b, _)| (a, b)).collect(),
            edge_weights,
        })
    }

    /// Fast path for algorithms that already produce symmetric sorted
    /// adjacency (powering). `adj[v]` must be sorted, self-loop free and
    /// symmetric; this is only checked in debug builds.
    pub(crate) fn from_sorted_adjacency(adj: Vec<Vec<u32>>) -> Graph {
        let n = adj.len();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0usize);
        let mut edges = Vec::new();
        for (v, list) in adj.iter().enumerate() {
            debug_assert!(list.windows(2).all(|w| w[0] < w[1]));
            offsets.push(offsets[v] + list.len());
            for &u in list {
                debug_assert_ne!(u as usize, v);
                if (v as u32) < u {
                    edges.push((v as u32, u));
                }
            }
        }
        let neighbors = adj.into_iter().flatten().collect();
        Graph {
            n,
            offsets,
            neighbors,
            neighbor_weights: None,
            edges,
            edge_weights: None,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Weights aligned with `neighbors(v)`, if the graph is weighted.
    pub fn neighbor_weights(&self, v: usize) -> Option<&[f64]> {
        self.neighbor_weights
            .as_ref()
            .map(|w| &w[self.offsets[v]..self.offsets[v + 1]])
    }

    pub fn is_weighted(&self) -> bool {
        self.neighbor_weights.is_some()
    }

    /// Canonical edge list (u < v, sorted).
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Weights aligned with `edges()`, if the graph is weighted.
    pub fn edge_weights(&self) -> Option<&[f64]> {
        self.edge_weights.as_deref()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn average_degree(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            2.0 * self.m() as f64 / self.n as f64
        }
    }

    /// Hop distances from `source`, truncated at `radius`.
    ///
    /// Returns exactly the vertices at distance <= `radius` with their
    /// exact distances. Weights are ignored.
    pub fn bfs_distances(&self, source: usize, radius: usize) -> Result<HashMap<u32, u32>> {
        if source >= self.n {
            return Err(Error::VertexOutOfRange { vertex: source, n: self.n });
        }
        let mut dist = HashMap::new();
        dist.insert(source as u32, 0u32);
        let mut queue = VecDeque::new();
        queue.push_back(source as u32);
        while let Some(v) = queue.pop_front() {
            let d = dist[&v];
            if d as usize >= radius {
                continue;
            }
            for &u in self.neighbors(v as usize) {
                dist.entry(u).or_insert_with(|| {
                    queue.push_back(u);
                    d + 1
                });
            }
        }
        Ok(dist)
    }

    /// BFS into caller-owned scratch. `dist` must be `u32::MAX`-filled for
    /// the touched region; touched vertices are returned so the caller can
    /// reset them. Far cheaper than the map API in hot loops.
    pub(crate) fn bfs_scratch(
        &self,
        source: u32,
        radius: u32,
        dist: &mut [u32],
        touched: &mut Vec<u32>,
        queue: &mut VecDeque<u32>,
    ) {
        debug_assert!(dist[source as usize] == u32::MAX);
        queue.clear();
        dist[source as usize] = 0;
        touched.push(source);
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            let d = dist[v as usize];
            if d >= radius {
                continue;
            }
            for &u in self.neighbors(v as usize) {
                if dist[u as usize] == u32::MAX {
                    dist[u as usize] = d + 1;
                    touched.push(u);
                    queue.push_back(u);
                }
            }
        }
    }

    /// Connected components as sorted vertex sets, ordered by smallest
    /// contained vertex id.
    pub fn connected_components(&self) -> Vec<VertexSet> {
        let mut comp = vec![u32::MAX; self.n];
        let mut components: Vec<Vec<u32>> = Vec::new();
        let mut queue = VecDeque::new();
        for s in 0..self.n {
            if comp[s] != u32::MAX {
                continue;
            }
            let id = components.len() as u32;
            comp[s] = id;
            let mut members = vec![s as u32];
            queue.push_back(s as u32);
            while let Some(v) = queue.pop_front() {
                for &u in self.neighbors(v as usize) {
                    if comp[u as usize] == u32::MAX {
                        comp[u as usize] = id;
                        members.push(u);
                        queue.push_back(u);
                    }
                }
            }
            members.sort_unstable();
            components.push(members);
        }
        components
            .into_iter()
            .map(|ids| VertexSet { ids })
            .collect()
    }

    /// Induced subgraph on `keep`, with vertex maps. Weights carry over.
    pub fn induced_subgraph(&self, keep: &[bool]) -> InducedSubgraph {
        assert_eq!(keep.len(), self.n);
        let mut old_to_new = vec![None; self.n];
        let mut new_to_old = Vec::new();
        for v in 0..self.n {
            if keep[v] {
                old_to_new[v] = Some(new_to_old.len() as u32);
                new_to_old.push(v as u32);
            }
        }
        let weighted = self.is_weighted();
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        for (idx, &(a, b)) in self.edges.iter().enumerate() {
            if let (Some(na), Some(nb)) = (old_to_new[a as usize], old_to_new[b as usize]) {
                let w = self.edge_weights.as_ref().map_or(1.0, |ws| ws[idx]);
                edges.push((na as usize, nb as usize, w));
            }
        }
        let graph = if weighted {
            Graph::build_weighted(new_to_old.len(), &edges).expect("induced subgraph is valid")
        } else {
            let unweighted: Vec<(usize, usize)> =
                edges.iter().map(|&(a, b, _)| (a, b)).collect();
            Graph::build(new_to_old.len(), &unweighted).expect("induced subgraph is valid")
        };
        InducedSubgraph { graph, old_to_new, new_to_old }
    }

    /// Largest connected component; ties broken toward the component with
    /// the smallest vertex id.
    pub fn largest_component(&self) -> Result<InducedSubgraph> {
        if self.n == 0 {
            return Err(Error::EmptyGraph);
        }
        let comps = self.connected_components();
        let best = comps
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
            .map(|(i, _)| i)
            .expect("nonempty graph has a component");
        let mut keep = vec![false; self.n];
        for &v in comps[best].ids() {
            keep[v as usize] = true;
        }
        Ok(self.induced_subgraph(&keep))
    }

    fn farthest_from(&self, source: u32, dist: &mut [u32]) -> (u32, u32) {
        dist.fill(u32::MAX);
        dist[source as usize] = 0;
        let mut queue = VecDeque::new();
        queue.push_back(source);
        let mut far = (source, 0u32);
        while let Some(v) = queue.pop_front() {
            let d = dist[v as usize];
            if d > far.1 {
                far = (v, d);
            }
            for &u in self.neighbors(v as usize) {
                if dist[u as usize] == u32::MAX {
                    dist[u as usize] = d + 1;
                    queue.push_back(u);
                }
            }
        }
        far
    }

    /// Diameter of a connected graph. Exact (all-sources BFS) up to
    /// [`EXACT_DIAMETER_LIMIT`] vertices; beyond that an iterated
    /// double-sweep lower bound flagged `exact: false`.
    pub fn diameter(&self) -> Result<Diameter> {
        if self.n == 0 {
            return Err(Error::EmptyGraph);
        }
        if self.connected_components().len() > 1 {
            return Err(Error::Disconnected);
        }
        if self.n <= EXACT_DIAMETER_LIMIT {
            use rayon::prelude::*;
            let value = (0..self.n as u32)
                .into_par_iter()
                .map(|s| {
                    let mut dist = vec![u32::MAX; self.n];
                    self.farthest_from(s, &mut dist).1
                })
                .max()
                .unwrap_or(0);
            Ok(Diameter { value: value as usize, exact: true })
        } else {
            // Iterated double sweep: follow the farthest-vertex chain from a
            // few spread-out starts and keep the best eccentricity seen.
            let mut dist = vec![u32::MAX; self.n];
            let mut best = 0u32;
            let stride = (self.n / 4).max(1);
            for start in (0..self.n).step_by(stride).take(4) {
                let (u, _) = self.farthest_from(start as u32, &mut dist);
                let (mut prev, mut d) = self.farthest_from(u, &mut dist);
                best = best.max(d);
                for _ in 0..3 {
                    let (w, d2) = self.farthest_from(prev, &mut dist);
                    if d2 <= d {
                        break;
                    }
                    d = d2;
                    best = best.max(d2);
                    prev = w;
                }
            }
            Ok(Diameter { value: best as usize, exact: false })
        }
    }
}

/// Graph plus ground-truth community label (1-based, in `1..=k`) per vertex.
#[derive(Debug, Clone)]
pub struct LabeledGraph {
    pub graph: Graph,
    pub labels: Vec<u32>,
    pub k: usize,
    /// Planar locations, retained by the geometric generators.
    pub locations: Option<Vec<[f64; 2]>>,
}

impl LabeledGraph {
    pub fn new(graph: Graph, labels: Vec<u32>, k: usize) -> Result<Self> {
        if labels.len() != graph.n() {
            return Err(Error::DimensionMismatch { expected: graph.n(), got: labels.len() });
        }
        if labels.iter().any(|&l| l == 0 || l as usize > k) {
            return Err(Error::InvalidParams(format!("labels must lie in 1..={k}")));
        }
        Ok(LabeledGraph { graph, labels, k, locations: None })
    }
}
