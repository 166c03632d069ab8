//! Graph-derived operators: powering, power-cuts, the distance and
//! self-avoiding-walk matrices, the nonbacktracking family, and the
//! classical spectral matrices.
//!
//! Everything spectral goes through [`LinearOp`], a matrix-free
//! "apply to vector" contract. Operators that are never materialized
//! (random walk, adjusted nonbacktracking) implement it directly; sparse
//! constructions ([`SparseSymMatrix`], the powered nonbacktracking matrix)
//! provide it on top of their storage.
//!
//! All operators are immutable once constructed; `apply` is reentrant and
//! safe for concurrent use with caller-owned vectors.

use std::collections::VecDeque;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexSet};

/// Matrix-free linear operator.
///
/// `apply` must be linear; `symmetrizer` returns a positive diagonal `s`
/// such that `diag(s) * M * diag(s)^-1` is symmetric, when one is known
/// (the identity scaling for genuinely symmetric operators). Solvers use
/// it to route conjugate operators through the symmetric path.
pub trait LinearOp: Sync + Send {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn symmetrizer(&self) -> Option<Vec<f64>> {
        None
    }

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

/// `-M`, preserving any symmetrizer.
pub struct Negated<T: LinearOp>(pub T);

impl<T: LinearOp> LinearOp for Negated<T> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply(x, y);
        for v in y.iter_mut() {
            *v = -*v;
        }
    }
    fn symmetrizer(&self) -> Option<Vec<f64>> {
        self.0.symmetrizer()
    }
}

/// Symmetric sparse matrix stored as lower-triangle `(i, j <= i, value)`
/// triples with implied symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix<T> {
    dim: usize,
    triples: Vec<(u32, u32, T)>,
}

impl<T: Copy + PartialEq> SparseSymMatrix<T> {
    pub fn new(dim: usize, mut triples: Vec<(u32, u32, T)>) -> Self {
        for t in triples.iter_mut() {
            if t.0 < t.1 {
                std::mem::swap(&mut t.0, &mut t.1);
            }
        }
        triples.sort_unstable_by_key(|&(i, j, _)| (i, j));
        debug_assert!(triples.windows(2).all(|w| (w[0].0, w[0].1) != (w[1].0, w[1].1)));
        SparseSymMatrix { dim, triples }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lower-triangle triples, sorted by `(i, j)`.
    pub fn triples(&self) -> &[(u32, u32, T)] {
        &self.triples
    }

    pub fn entry(&self, i: u32, j: u32) -> Option<T> {
        let key = (i.max(j), i.min(j));
        self.triples
            .binary_search_by_key(&key, |&(a, b, _)| (a, b))
            .ok()
            .map(|idx| self.triples[idx].2)
    }

    pub fn nnz_lower(&self) -> usize {
        self.triples.len()
    }
}

impl SparseSymMatrix<f64> {
    /// Expand to CSR for repeated application.
    pub fn to_csr(&self) -> CsrMatrix {
        let n = self.dim;
        let mut degree = vec![0usize; n];
        for &(i, j, _) in &self.triples {
            degree[i as usize] += 1;
            if i != j {
                degree[j as usize] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for v in 0..n {
            offsets.push(offsets[v] + degree[v]);
        }
        let mut cols = vec![0u32; offsets[n]];
        let mut vals = vec![0f64; offsets[n]];
        let mut cursor = offsets.clone();
        for &(i, j, w) in &self.triples {
            cols[cursor[i as usize]] = j;
            vals[cursor[i as usize]] = w;
            cursor[i as usize] += 1;
            if i != j {
                cols[cursor[j as usize]] = i;
                vals[cursor[j as usize]] = w;
                cursor[j as usize] += 1;
            }
        }
        CsrMatrix { n, offsets, cols, vals, symmetric: true }
    }
}

/// CSR matrix; `symmetric` gates the trivial symmetrizer.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    symmetric: bool,
}

impl LinearOp for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for idx in self.offsets[i]..self.offsets[i + 1] {
                acc += self.vals[idx] * x[self.cols[idx] as usize];
            }
            y[i] = acc;
        }
    }
    fn symmetrizer(&self) -> Option<Vec<f64>> {
        self.symmetric.then(|| vec![1.0; self.n])
    }
}

/// Indexing of the `2|E|` directed edges: undirected edge `e = (u, v)`
/// (with `u < v`) gets ids `2e` for `u -> v` and `2e + 1` for `v -> u`,
/// so `reverse(d) = d ^ 1`.
#[derive(Debug, Clone)]
pub struct DirectedEdgeSpace {
    m: usize,
    tails: Vec<u32>,
    heads: Vec<u32>,
    /// Directed edge id aligned with the graph's CSR neighbor array:
    /// `out_ids[out_offsets[v] + i]` is the edge from `v` to its i-th
    /// neighbor.
    out_ids: Vec<u32>,
    out_offsets: Vec<usize>,
}

impl DirectedEdgeSpace {
    pub fn new(g: &Graph) -> Self {
        let m = g.m();
        let mut tails = vec![0u32; 2 * m];
        let mut heads = vec![0u32; 2 * m];
        for (e, &(u, v)) in g.edges().iter().enumerate() {
            tails[2 * e] = u;
            heads[2 * e] = v;
            tails[2 * e + 1] = v;
            heads[2 * e + 1] = u;
        }
        let mut out_offsets = Vec::with_capacity(g.n() + 1);
        out_offsets.push(0usize);
        for v in 0..g.n() {
            out_offsets.push(out_offsets[v] + g.degree(v));
        }
        let mut out_ids = vec![0u32; 2 * m];
        for d in 0..2 * m {
            let t = tails[d] as usize;
            let pos = g.neighbors(t).binary_search(&heads[d]).expect("edge endpoint");
            out_ids[out_offsets[t] + pos] = d as u32;
        }
        DirectedEdgeSpace { m, tails, heads, out_ids, out_offsets }
    }

    pub fn count(&self) -> usize {
        2 * self.m
    }

    pub fn tail(&self, d: u32) -> u32 {
        self.tails[d as usize]
    }

    pub fn head(&self, d: u32) -> u32 {
        self.heads[d as usize]
    }

    pub fn reverse(&self, d: u32) -> u32 {
        d ^ 1
    }

    /// Directed edges leaving `v`, aligned with the graph's sorted
    /// neighbor list of `v`.
    pub fn out_edges(&self, v: usize) -> &[u32] {
        &self.out_ids[self.out_offsets[v]..self.out_offsets[v + 1]]
    }

    /// Id of the directed edge `tail -> head`, if present.
    pub fn index(&self, g: &Graph, tail: u32, head: u32) -> Option<u32> {
        g.neighbors(tail as usize)
            .binary_search(&head)
            .ok()
            .map(|pos| self.out_ids[self.out_offsets[tail as usize] + pos])
    }
}

fn desk_guard(n: usize, max_deg: usize, r: usize, what: &str) -> Result<()> {
    const LIMIT: f64 = 1e9;
    let cost = (n as f64) * (max_deg.max(1) as f64).powi(r as i32);
    if cost > LIMIT {
        return Err(Error::TooLarge(format!(
            "{what}: n * max_degree^r = {cost:.3e} exceeds {LIMIT:.0e}"
        )));
    }
    Ok(())
}

/// The r-th graph power: same vertex set, `{u, v}` an edge iff
/// `0 < d_G(u, v) <= r`. Computed by truncated BFS from every source; the
/// output is a simple graph (no self-loops). Adding the identity would
/// shift every eigenvalue by one without changing eigenvectors.
pub fn graph_power(g: &Graph, r: usize) -> Result<Graph> {
    if r == 0 {
        return Err(Error::InvalidR);
    }
    let n = g.n();
    let adj: Vec<Vec<u32>> = (0..n as u32)
        .into_par_iter()
        .map(|v| {
            let mut dist = vec![u32::MAX; n];
            let mut touched = Vec::new();
            let mut queue = VecDeque::new();
            g.bfs_scratch(v, r as u32, &mut dist, &mut touched, &mut queue);
            let mut list: Vec<u32> = touched.into_iter().filter(|&u| u != v).collect();
            list.sort_unstable();
            list
        })
        .collect();
    Ok(Graph::from_sorted_adjacency(adj))
}

/// Size of the r-power-cut around `S`: unordered pairs `(u in S, v not in
/// S)` with `d_G(u, v) <= r`, each counted once.
pub fn power_cut_size(g: &Graph, r: usize, s: &VertexSet) -> Result<usize> {
    if r == 0 {
        return Err(Error::InvalidR);
    }
    if let Some(&max) = s.ids().last() {
        if max as usize >= g.n() {
            return Err(Error::VertexOutOfRange { vertex: max as usize, n: g.n() });
        }
    }
    let mut in_s = vec![false; g.n()];
    for &v in s.ids() {
        in_s[v as usize] = true;
    }
    let mut dist = vec![u32::MAX; g.n()];
    let mut touched = Vec::new();
    let mut queue = VecDeque::new();
    let mut count = 0usize;
    for &v in s.ids() {
        g.bfs_scratch(v, r as u32, &mut dist, &mut touched, &mut queue);
        count += touched.iter().filter(|&&u| !in_s[u as usize]).count();
        for &u in &touched {
            dist[u as usize] = u32::MAX;
        }
        touched.clear();
    }
    Ok(count)
}

/// The r-distance matrix: 0/1 indicator of pairs at hop distance exactly
/// `r`. `r = 0` gives the identity.
pub fn distance_matrix(g: &Graph, r: usize) -> SparseSymMatrix<f64> {
    let n = g.n();
    if r == 0 {
        let triples = (0..n as u32).map(|i| (i, i, 1.0)).collect();
        return SparseSymMatrix::new(n, triples);
    }
    let triples: Vec<(u32, u32, f64)> = (0..n as u32)
        .into_par_iter()
        .map(|i| {
            let mut dist = vec![u32::MAX; n];
            let mut touched = Vec::new();
            let mut queue = VecDeque::new();
            g.bfs_scratch(i, r as u32, &mut dist, &mut touched, &mut queue);
            touched
                .into_iter()
                .filter(|&j| j <= i && dist[j as usize] == r as u32)
                .map(|j| (i, j, 1.0))
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();
    SparseSymMatrix::new(n, triples)
}

fn saw_counts_from(g: &Graph, source: u32, r: usize) -> Vec<(u32, i64)> {
    let n = g.n();
    let mut on_path = vec![false; n];
    let mut counts: Vec<i64> = vec![0; n];
    // Iterative DFS over simple paths of exactly r edges.
    let mut stack: Vec<(u32, usize)> = Vec::with_capacity(r + 1);
    on_path[source as usize] = true;
    stack.push((source, 0));
    while !stack.is_empty() {
        let depth = stack.len() - 1;
        let (v, cursor) = *stack.last().unwrap();
        if depth == r {
            counts[v as usize] += 1;
            on_path[v as usize] = false;
            stack.pop();
            continue;
        }
        let ns = g.neighbors(v as usize);
        let mut i = cursor;
        let mut advanced = false;
        while i < ns.len() {
            let u = ns[i];
            i += 1;
            if !on_path[u as usize] {
                stack.last_mut().unwrap().1 = i;
                on_path[u as usize] = true;
                stack.push((u, 0));
                advanced = true;
                break;
            }
        }
        if !advanced {
            on_path[v as usize] = false;
            stack.pop();
        }
    }
    counts
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(j, c)| (j as u32, c))
        .collect()
}

/// Self-avoiding-walk matrix: entry `(i, j)` counts simple paths with
/// exactly `r` edges between `i` and `j`.
pub fn saw_matrix(g: &Graph, r: usize) -> Result<SparseSymMatrix<i64>> {
    if r == 0 {
        return Err(Error::InvalidR);
    }
    desk_guard(g.n(), g.max_degree(), r, "saw_matrix")?;
    let triples: Vec<(u32, u32, i64)> = (0..g.n() as u32)
        .into_par_iter()
        .map(|i| {
            saw_counts_from(g, i, r)
                .into_iter()
                .filter(|&(j, _)| j <= i)
                .map(|(j, c)| (i, j, c))
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();
    Ok(SparseSymMatrix::new(g.n(), triples))
}

/// True when no vertex has more than one independent cycle in its
/// r-neighborhood (the induced subgraph on its radius-r ball).
pub fn no_two_cycles_in_balls(g: &Graph, r: usize) -> bool {
    let n = g.n();
    (0..n as u32).into_par_iter().all(|v| {
        let mut dist = vec![u32::MAX; n];
        let mut touched = Vec::new();
        let mut queue = VecDeque::new();
        g.bfs_scratch(v, r as u32, &mut dist, &mut touched, &mut queue);
        let mut ball_edges = 0usize;
        for &u in &touched {
            for &w in g.neighbors(u as usize) {
                if dist[w as usize] != u32::MAX {
                    ball_edges += 1;
                }
            }
        }
        ball_edges /= 2;
        // The ball is connected, so its cyclomatic number is m - n + 1.
        ball_edges + 1 <= touched.len() + 1
    })
}

/// Matrix-free nonbacktracking operator `B` over the directed edge space:
/// `(Bw)_(v1,v2)` sums `w_(x,v1)` over `x in N(v1), x != v2`.
pub struct NonbacktrackingOp {
    graph: Arc<Graph>,
    des: Arc<DirectedEdgeSpace>,
}

pub fn nonbacktracking(g: &Arc<Graph>) -> Result<NonbacktrackingOp> {
    if g.m() == 0 {
        return Err(Error::NoEdges);
    }
    let des = Arc::new(DirectedEdgeSpace::new(g));
    Ok(NonbacktrackingOp { graph: Arc::clone(g), des })
}

impl NonbacktrackingOp {
    pub fn edge_space(&self) -> &Arc<DirectedEdgeSpace> {
        &self.des
    }
}

impl LinearOp for NonbacktrackingOp {
    fn dim(&self) -> usize {
        self.des.count()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut s_in = vec![0.0f64; self.graph.n()];
        for d in 0..self.des.count() as u32 {
            s_in[self.des.head(d) as usize] += x[d as usize];
        }
        for d in 0..self.des.count() as u32 {
            let tail = self.des.tail(d) as usize;
            y[d as usize] = s_in[tail] - x[self.des.reverse(d) as usize];
        }
    }
}

/// Powered nonbacktracking matrix `1(B^r >= 1)`: 0/1 sparse operator whose
/// entry `(e, f)` is set when a length-`r` nonbacktracking walk leads from
/// edge `f` to edge `e`. Stored column-major (reachable set per source
/// edge), built by level-set BFS over the directed line graph.
pub struct PoweredNbMatrix {
    des: Arc<DirectedEdgeSpace>,
    /// `cols[f]` = sorted target edges reachable in exactly `r` steps.
    cols: Vec<Vec<u32>>,
}

pub fn powered_nonbacktracking(g: &Arc<Graph>, r: usize) -> Result<PoweredNbMatrix> {
    if r == 0 {
        return Err(Error::InvalidR);
    }
    if g.m() == 0 {
        return Err(Error::NoEdges);
    }
    desk_guard(g.n(), g.max_degree(), r, "powered_nonbacktracking")?;
    let des = Arc::new(DirectedEdgeSpace::new(g));
    let dim = des.count();
    let des_ref = Arc::clone(&des);
    let cols: Vec<Vec<u32>> = (0..dim as u32)
        .into_par_iter()
        .map(|f| {
            let mut level: Vec<u32> = vec![f];
            let mut next: Vec<u32> = Vec::new();
            for _ in 0..r {
                next.clear();
                for &d in &level {
                    let head = des_ref.head(d) as usize;
                    let back = des_ref.reverse(d);
                    for &succ in des_ref.out_edges(head) {
                        if succ != back {
                            next.push(succ);
                        }
                    }
                }
                next.sort_unstable();
                next.dedup();
                std::mem::swap(&mut level, &mut next);
                if level.is_empty() {
                    break;
                }
            }
            level
        })
        .collect();
    Ok(PoweredNbMatrix { des, cols })
}

impl PoweredNbMatrix {
    pub fn edge_space(&self) -> &Arc<DirectedEdgeSpace> {
        &self.des
    }

    /// Whether a length-r nonbacktracking walk leads from `source` to
    /// `target`.
    pub fn entry(&self, target: u32, source: u32) -> bool {
        self.cols[source as usize].binary_search(&target).is_ok()
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }
}

impl LinearOp for PoweredNbMatrix {
    fn dim(&self) -> usize {
        self.des.count()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for (f, targets) in self.cols.iter().enumerate() {
            let xf = x[f];
            if xf != 0.0 {
                for &e in targets {
                    y[e as usize] += xf;
                }
            }
        }
    }
}

/// Adjusted nonbacktracking operator on `2|E| + n` coordinates: the edge
/// block follows nonbacktracking propagation scaled by `1/d`, and both
/// blocks subtract a `1/n`-scaled sum over non-neighbors, computed as
/// total-sum-minus-exclusions so one apply costs `O(n + m)`.
pub struct AdjustedNbOp {
    graph: Arc<Graph>,
    des: Arc<DirectedEdgeSpace>,
    d: f64,
}

pub fn adjusted_nonbacktracking(g: &Arc<Graph>, d: f64) -> Result<AdjustedNbOp> {
    if !(d > 0.0) {
        return Err(Error::InvalidParams(format!("degree parameter must be positive, got {d}")));
    }
    let des = Arc::new(DirectedEdgeSpace::new(g));
    Ok(AdjustedNbOp { graph: Arc::clone(g), des, d })
}

impl AdjustedNbOp {
    pub fn edge_space(&self) -> &Arc<DirectedEdgeSpace> {
        &self.des
    }

    pub fn edge_count(&self) -> usize {
        self.des.count()
    }
}

impl LinearOp for AdjustedNbOp {
    fn dim(&self) -> usize {
        self.des.count() + self.graph.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = &self.graph;
        let n = g.n();
        let nf = n as f64;
        let ne = self.des.count();
        let (xe, xv) = x.split_at(ne);

        let s_all: f64 = xv.iter().sum();
        let mut s_out = vec![0.0f64; n];
        for d in 0..ne as u32 {
            s_out[self.des.tail(d) as usize] += xe[d as usize];
        }
        let mut s_nbr = vec![0.0f64; n];
        for (v, slot) in s_nbr.iter_mut().enumerate() {
            *slot = g.neighbors(v).iter().map(|&u| xv[u as usize]).sum();
        }

        for d in 0..ne as u32 {
            let vprime = self.des.head(d) as usize;
            let edge_sum = s_out[vprime] - xe[self.des.reverse(d) as usize];
            let nonedge_sum = s_all - s_nbr[vprime] - xv[vprime];
            y[d as usize] = edge_sum / self.d - nonedge_sum / nf;
        }
        for v in 0..n {
            let nonedge_sum = s_all - s_nbr[v] - xv[v];
            y[ne + v] = s_out[v] / self.d - nonedge_sum / nf;
        }
    }
}

/// Classical vertex-space operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassicalKind {
    Adjacency,
    AdjacencyWithLoops,
    Laplacian,
    NormalizedLaplacian,
    /// `D^-1 A` applied as `y_v = (1/deg v) * sum of x_u over u in N(v)`;
    /// row-stochastic, so the all-ones vector has eigenvalue 1.
    RandomWalk,
}

pub struct ClassicalOp {
    graph: Arc<Graph>,
    kind: ClassicalKind,
    inv_sqrt_deg: Vec<f64>,
}

pub fn classical_operator(g: &Arc<Graph>, kind: ClassicalKind) -> Result<ClassicalOp> {
    let needs_degrees =
        matches!(kind, ClassicalKind::NormalizedLaplacian | ClassicalKind::RandomWalk);
    let mut inv_sqrt_deg = Vec::new();
    if needs_degrees {
        inv_sqrt_deg.reserve(g.n());
        for v in 0..g.n() {
            let d = g.degree(v);
            if d == 0 {
                return Err(Error::ZeroDegree(v));
            }
            inv_sqrt_deg.push(1.0 / (d as f64).sqrt());
        }
    }
    Ok(ClassicalOp { graph: Arc::clone(g), kind, inv_sqrt_deg })
}

impl ClassicalOp {
    pub fn kind(&self) -> ClassicalKind {
        self.kind
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }
}

impl LinearOp for ClassicalOp {
    fn dim(&self) -> usize {
        self.graph.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = &self.graph;
        match self.kind {
            ClassicalKind::Adjacency => {
                for v in 0..g.n() {
                    y[v] = g.neighbors(v).iter().map(|&u| x[u as usize]).sum();
                }
            }
            ClassicalKind::AdjacencyWithLoops => {
                for v in 0..g.n() {
                    let s: f64 = g.neighbors(v).iter().map(|&u| x[u as usize]).sum();
                    y[v] = s + x[v];
                }
            }
            ClassicalKind::Laplacian => {
                for v in 0..g.n() {
                    let s: f64 = g.neighbors(v).iter().map(|&u| x[u as usize]).sum();
                    y[v] = g.degree(v) as f64 * x[v] - s;
                }
            }
            ClassicalKind::NormalizedLaplacian => {
                for v in 0..g.n() {
                    let s: f64 = g
                        .neighbors(v)
                        .iter()
                        .map(|&u| self.inv_sqrt_deg[u as usize] * x[u as usize])
                        .sum();
                    y[v] = x[v] - self.inv_sqrt_deg[v] * s;
                }
            }
            ClassicalKind::RandomWalk => {
                for v in 0..g.n() {
                    let s: f64 = g.neighbors(v).iter().map(|&u| x[u as usize]).sum();
                    y[v] = s * self.inv_sqrt_deg[v] * self.inv_sqrt_deg[v];
                }
            }
        }
    }

    fn symmetrizer(&self) -> Option<Vec<f64>> {
        match self.kind {
            ClassicalKind::RandomWalk => {
                // diag(sqrt deg) D^-1 A diag(sqrt deg)^-1 = D^-1/2 A D^-1/2.
                Some(self.inv_sqrt_deg.iter().map(|s| 1.0 / s).collect())
            }
            _ => Some(vec![1.0; self.graph.n()]),
        }
    }
}
