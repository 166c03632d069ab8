//! Belief propagation and its variants: the exact one-step posterior,
//! path-state BP, plain BP, adjusted BP (non-edge evidence included), the
//! linearized forms, and the Kronecker-identity check tying the adjusted
//! linearized recursion to the adjusted nonbacktracking operator.
//!
//! Directed-edge beliefs follow the [`DirectedEdgeSpace`] indexing: the
//! belief on edge `(v, v')` is the estimate of `v'`'s community with `v`
//! removed. Adjusted products over the `Theta(n)` non-edges are kept in
//! log space (factors are nonnegative, zeros map to `-inf`) and assembled
//! by the global-sum-minus-exclusions trick, so one round costs
//! `O(n + m)` per community.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::operators::{self, DirectedEdgeSpace, LinearOp};
use crate::rng;

/// Block-model parameters with the equal-expected-degree assumption:
/// prior `p`, symmetric connectivity `Q` (edge probability `Q_ij / n`),
/// and the common expected degree `d` with every entry of `Q p` equal to
/// `d`.
#[derive(Debug, Clone)]
pub struct ModelParams {
    p: Vec<f64>,
    q: Vec<f64>,
    d: f64,
    n: usize,
    k: usize,
}

impl ModelParams {
    pub fn new(p: Vec<f64>, q: Vec<f64>, n: usize) -> Result<Self> {
        let k = p.len();
        if k == 0 || n == 0 {
            return Err(Error::InvalidParams("empty prior or zero vertices".into()));
        }
        if q.len() != k * k {
            return Err(Error::InvalidParams("connectivity matrix must be k x k".into()));
        }
        if p.iter().any(|&x| x < 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams("prior must be nonnegative and sum to 1".into()));
        }
        for i in 0..k {
            for j in 0..k {
                if q[i * k + j] < 0.0 {
                    return Err(Error::InvalidParams("connectivity must be nonnegative".into()));
                }
                if (q[i * k + j] - q[j * k + i]).abs() > 0.0 {
                    return Err(Error::InvalidParams("connectivity must be symmetric".into()));
                }
            }
        }
        let qp: Vec<f64> =
            (0..k).map(|i| (0..k).map(|j| q[i * k + j] * p[j]).sum()).collect();
        let d = qp[0];
        if qp.iter().any(|&x| (x - d).abs() > 1e-9) {
            return Err(Error::InvalidParams(format!(
                "expected degrees differ across communities: {qp:?}"
            )));
        }
        if d <= 0.0 {
            return Err(Error::InvalidParams("expected degree must be positive".into()));
        }
        Ok(ModelParams { p, q, d, n, k })
    }

    /// Symmetric two-community model with rates `a/n` inside, `b/n` across.
    pub fn sbm_sym(n: usize, a: f64, b: f64) -> Result<Self> {
        ModelParams::new(vec![0.5, 0.5], vec![a, b, b, a], n)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn prior(&self) -> &[f64] {
        &self.p
    }

    /// `(Q x)_i`.
    pub fn q_times(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k)
            .map(|i| (0..self.k).map(|j| self.q[i * self.k + j] * x[j]).sum())
            .collect()
    }

    /// `(P Q x)_i = p_i (Q x)_i`.
    pub fn pq_times(&self, x: &[f64]) -> Vec<f64> {
        self.q_times(x).iter().zip(&self.p).map(|(qx, pi)| qx * pi).collect()
    }

    fn max_q(&self) -> f64 {
        self.q.iter().copied().fold(0.0, f64::max)
    }
}

/// Edge and vertex beliefs, one `k`-vector per directed edge and per
/// vertex. `signed` marks outputs of the linearized algorithms, whose
/// entries may leave `[0, 1]`.
#[derive(Debug, Clone)]
pub struct BeliefState {
    pub k: usize,
    pub edge: Vec<f64>,
    pub vertex: Vec<f64>,
    pub signed: bool,
}

impl BeliefState {
    pub fn prior(g: &Graph, params: &ModelParams) -> Self {
        let ne = 2 * g.m();
        let k = params.k();
        let mut edge = Vec::with_capacity(ne * k);
        for _ in 0..ne {
            edge.extend_from_slice(params.prior());
        }
        let mut vertex = Vec::with_capacity(g.n() * k);
        for _ in 0..g.n() {
            vertex.extend_from_slice(params.prior());
        }
        BeliefState { k, edge, vertex, signed: false }
    }

    pub fn edge_belief(&self, d: u32) -> &[f64] {
        &self.edge[d as usize * self.k..(d as usize + 1) * self.k]
    }

    pub fn edge_belief_mut(&mut self, d: u32) -> &mut [f64] {
        &mut self.edge[d as usize * self.k..(d as usize + 1) * self.k]
    }

    pub fn vertex_belief(&self, v: usize) -> &[f64] {
        &self.vertex[v * self.k..(v + 1) * self.k]
    }

    pub fn vertex_belief_mut(&mut self, v: usize) -> &mut [f64] {
        &mut self.vertex[v * self.k..(v + 1) * self.k]
    }

    /// Max deviation of any belief vector from summing to one.
    pub fn normalization_error(&self) -> f64 {
        let k = self.k;
        let worst = |buf: &[f64]| {
            buf.chunks_exact(k)
                .map(|c| (c.iter().sum::<f64>() - 1.0).abs())
                .fold(0.0f64, f64::max)
        };
        worst(&self.edge).max(worst(&self.vertex))
    }
}

/// One-step posterior from neighbor beliefs:
/// `p_i * prod_j (Q q_j)_i / Z`. Factors are rescaled by their maximum
/// entry, which cancels in the normalization.
pub fn posterior_from_neighbors(
    params: &ModelParams,
    neighbor_beliefs: &[&[f64]],
) -> Result<Vec<f64>> {
    let k = params.k();
    let mut acc: Vec<f64> = params.prior().to_vec();
    for q in neighbor_beliefs {
        let qq = params.q_times(q);
        let top = qq.iter().copied().fold(0.0f64, f64::max);
        if top == 0.0 {
            return Err(Error::ZeroNormalizer);
        }
        for i in 0..k {
            acc[i] *= qq[i] / top;
        }
    }
    let z: f64 = acc.iter().sum();
    if z <= 0.0 {
        return Err(Error::ZeroNormalizer);
    }
    Ok(acc.iter().map(|x| x / z).collect())
}

fn check_edge_state(g: &Graph, params: &ModelParams, state: &BeliefState) -> Result<()> {
    let want = 2 * g.m() * params.k();
    if state.edge.len() != want {
        return Err(Error::DimensionMismatch { expected: want, got: state.edge.len() });
    }
    Ok(())
}

/// Plain belief propagation: `t - 1` rounds of edge-message updates (the
/// message on `(v, v')` aggregates `v'`'s other neighbors), then one
/// vertex aggregation over all incident edges. Non-edges are ignored.
pub fn bp(t: usize, q0: &BeliefState, params: &ModelParams, g: &Graph) -> Result<BeliefState> {
    if t == 0 {
        return Err(Error::InvalidParams("t must be at least 1".into()));
    }
    check_edge_state(g, params, q0)?;
    let des = DirectedEdgeSpace::new(g);
    let k = params.k();
    let ne = des.count();
    let mut cur = q0.edge.clone();
    let mut next = vec![0.0f64; ne * k];
    let mut qq = vec![0.0f64; ne * k];

    for _round in 1..t {
        for d in 0..ne {
            let block = &cur[d * k..(d + 1) * k];
            let v = params.q_times(block);
            qq[d * k..(d + 1) * k].copy_from_slice(&v);
        }
        for d in 0..ne as u32 {
            let vprime = des.head(d) as usize;
            let back = des.reverse(d);
            let mut acc: Vec<f64> = params.prior().to_vec();
            for &f in des.out_edges(vprime) {
                if f == back {
                    continue;
                }
                let factor = &qq[f as usize * k..(f as usize + 1) * k];
                let top = factor.iter().copied().fold(0.0f64, f64::max);
                if top == 0.0 {
                    return Err(Error::ZeroNormalizer);
                }
                for i in 0..k {
                    acc[i] *= factor[i] / top;
                }
            }
            let z: f64 = acc.iter().sum();
            if z <= 0.0 {
                return Err(Error::ZeroNormalizer);
            }
            for i in 0..k {
                next[d as usize * k + i] = acc[i] / z;
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }

    let mut out = BeliefState {
        k,
        edge: cur.clone(),
        vertex: vec![0.0; g.n() * k],
        signed: false,
    };
    for v in 0..g.n() {
        let beliefs: Vec<&[f64]> = des
            .out_edges(v)
            .iter()
            .map(|&f| &cur[f as usize * k..(f as usize + 1) * k])
            .collect();
        let post = posterior_from_neighbors(params, &beliefs)?;
        out.vertex_belief_mut(v).copy_from_slice(&post);
    }
    Ok(out)
}

/// Adjusted belief propagation: every round updates edge messages *and*
/// vertex beliefs, multiplying in `[1 - (Q q_u)_i / n]` for each
/// non-neighbor `u`. Products run in log space; the non-edge product is
/// the global sum minus the excluded neighbors.
pub fn adjusted_bp(
    t: usize,
    q0: &BeliefState,
    params: &ModelParams,
    g: &Graph,
) -> Result<BeliefState> {
    adjusted_bp_inner(t, q0, params, g, true)
}

fn adjusted_bp_inner(
    t: usize,
    q0: &BeliefState,
    params: &ModelParams,
    g: &Graph,
    include_nonedges: bool,
) -> Result<BeliefState> {
    if t == 0 {
        return Err(Error::InvalidParams("t must be at least 1".into()));
    }
    if params.n() != g.n() {
        return Err(Error::InvalidParams(format!(
            "params.n = {} but graph has {} vertices",
            params.n(),
            g.n()
        )));
    }
    if params.max_q() >= g.n() as f64 {
        return Err(Error::InvalidParams(
            "non-edge factors require every Q entry below n".into(),
        ));
    }
    check_edge_state(g, params, q0)?;
    let want_v = g.n() * params.k();
    if q0.vertex.len() != want_v {
        return Err(Error::DimensionMismatch { expected: want_v, got: q0.vertex.len() });
    }

    let des = DirectedEdgeSpace::new(g);
    let k = params.k();
    let n = g.n();
    let nf = n as f64;
    let ne = des.count();

    let mut edge_cur = q0.edge.clone();
    let mut vert_cur = q0.vertex.clone();
    let mut edge_next = vec![0.0f64; ne * k];
    let mut vert_next = vec![0.0f64; n * k];

    let ln_qq_edge = |cur: &[f64], d: usize| -> Vec<f64> {
        params.q_times(&cur[d * k..(d + 1) * k]).iter().map(|&x| x.ln()).collect()
    };

    // One full update of edges (round < t) or vertices only (round == t).
    let mut round = 1usize;
    loop {
        // ln(Q q) per directed edge and ln(1 - (Q q_u)/n) per vertex.
        let mut ln_edge = vec![0.0f64; ne * k];
        for d in 0..ne {
            let v = ln_qq_edge(&edge_cur, d);
            ln_edge[d * k..(d + 1) * k].copy_from_slice(&v);
        }
        let mut ln_nonedge = vec![0.0f64; n * k];
        let mut global = vec![0.0f64; k];
        if include_nonedges {
            for u in 0..n {
                let qq = params.q_times(&vert_cur[u * k..(u + 1) * k]);
                for i in 0..k {
                    let f = 1.0 - qq[i] / nf;
                    let lf = if f > 0.0 { f.ln() } else { f64::NEG_INFINITY };
                    ln_nonedge[u * k + i] = lf;
                    global[i] += lf;
                }
            }
        }
        // Per-vertex neighbor exclusion sums.
        let mut excl = vec![0.0f64; n * k];
        if include_nonedges {
            for v in 0..n {
                for i in 0..k {
                    excl[v * k + i] = ln_nonedge[v * k + i];
                }
                for &u in g.neighbors(v) {
                    for i in 0..k {
                        excl[v * k + i] += ln_nonedge[u as usize * k + i];
                    }
                }
            }
        }

        let normalize = |logits: &mut [f64]| -> Result<Vec<f64>> {
            let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if top == f64::NEG_INFINITY {
                return Err(Error::ZeroNormalizer);
            }
            let mut out: Vec<f64> = logits.iter().map(|&l| (l - top).exp()).collect();
            let z: f64 = out.iter().sum();
            if !(z > 0.0) || !z.is_finite() {
                return Err(Error::NumericalUnderflow);
            }
            for x in out.iter_mut() {
                *x /= z;
            }
            Ok(out)
        };

        let vertex_logits = |v: usize| -> Vec<f64> {
            let mut logits: Vec<f64> = params.prior().iter().map(|&pi| pi.ln()).collect();
            for &f in des.out_edges(v) {
                for i in 0..k {
                    logits[i] += ln_edge[f as usize * k + i];
                }
            }
            if include_nonedges {
                for (i, logit) in logits.iter_mut().enumerate() {
                    *logit += global[i] - excl[v * k + i];
                }
            }
            logits
        };

        if round == t {
            for v in 0..n {
                let mut logits = vertex_logits(v);
                let post = normalize(&mut logits)?;
                vert_next[v * k..(v + 1) * k].copy_from_slice(&post);
            }
            return Ok(BeliefState { k, edge: edge_cur, vertex: vert_next, signed: false });
        }

        for d in 0..ne as u32 {
            let vprime = des.head(d) as usize;
            let back = des.reverse(d);
            let mut logits: Vec<f64> = params.prior().iter().map(|&pi| pi.ln()).collect();
            for &f in des.out_edges(vprime) {
                if f == back {
                    continue;
                }
                for i in 0..k {
                    logits[i] += ln_edge[f as usize * k + i];
                }
            }
            if include_nonedges {
                for (i, logit) in logits.iter_mut().enumerate() {
                    *logit += global[i] - excl[vprime * k + i];
                }
            }
            let post = normalize(&mut logits)?;
            edge_next[d as usize * k..(d as usize + 1) * k].copy_from_slice(&post);
        }
        for v in 0..n {
            let mut logits = vertex_logits(v);
            let post = normalize(&mut logits)?;
            vert_next[v * k..(v + 1) * k].copy_from_slice(&post);
        }
        std::mem::swap(&mut edge_cur, &mut edge_next);
        std::mem::swap(&mut vert_cur, &mut vert_next);
        round += 1;
    }
}

/// Beliefs attached to simple paths (the belief is about the path's last
/// vertex, conditioned on the earlier ones being removed). Missing paths
/// default to the prior.
pub type PathBeliefs = HashMap<Vec<u32>, Vec<f64>>;

fn enumerate_paths(g: &Graph, len: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut path: Vec<u32> = Vec::with_capacity(len + 1);
    let mut on_path = vec![false; g.n()];
    fn dfs(
        g: &Graph,
        path: &mut Vec<u32>,
        on_path: &mut [bool],
        len: usize,
        out: &mut Vec<Vec<u32>>,
    ) {
        if path.len() == len + 1 {
            out.push(path.clone());
            return;
        }
        let v = *path.last().unwrap();
        for &u in g.neighbors(v as usize) {
            if !on_path[u as usize] {
                on_path[u as usize] = true;
                path.push(u);
                dfs(g, path, on_path, len, out);
                path.pop();
                on_path[u as usize] = false;
            }
        }
    }
    for v in 0..g.n() as u32 {
        on_path[v as usize] = true;
        path.push(v);
        dfs(g, &mut path, &mut on_path, len, &mut out);
        path.pop();
        on_path[v as usize] = false;
    }
    out
}

/// Path-state belief propagation, a desk-scale reference implementation:
/// beliefs live on simple paths of decreasing length, ending in the
/// vertex aggregation. Guarded by `t <= 4` and `n * max_degree^t <= 1e7`.
pub fn path_bp(
    t: usize,
    q0: &PathBeliefs,
    params: &ModelParams,
    g: &Graph,
) -> Result<BeliefState> {
    if t == 0 {
        return Err(Error::InvalidParams("t must be at least 1".into()));
    }
    if t > 4 {
        return Err(Error::TooLarge(format!("path-state rounds capped at 4, got {t}")));
    }
    let cost = g.n() as f64 * (g.max_degree().max(1) as f64).powi(t as i32);
    if cost > 1e7 {
        return Err(Error::TooLarge(format!(
            "path-state memory n * max_degree^t = {cost:.3e} exceeds 1e7"
        )));
    }
    let k = params.k();
    // Beliefs for paths of length t come from q0 (default prior).
    let mut cur: HashMap<Vec<u32>, Vec<f64>> = enumerate_paths(g, t)
        .into_iter()
        .map(|p| {
            let belief = q0.get(&p).cloned().unwrap_or_else(|| params.prior().to_vec());
            (p, belief)
        })
        .collect();

    for round in 1..t {
        let len = t - round;
        let mut next: HashMap<Vec<u32>, Vec<f64>> = HashMap::new();
        for path in enumerate_paths(g, len) {
            let last = *path.last().unwrap() as usize;
            let mut acc: Vec<f64> = params.prior().to_vec();
            for &u in g.neighbors(last) {
                if path.contains(&u) {
                    continue;
                }
                let mut ext = path.clone();
                ext.push(u);
                let prev = cur
                    .get(&ext)
                    .expect("extension beliefs computed in the previous round");
                let qq = params.q_times(prev);
                let top = qq.iter().copied().fold(0.0f64, f64::max);
                if top == 0.0 {
                    return Err(Error::ZeroNormalizer);
                }
                for i in 0..k {
                    acc[i] *= qq[i] / top;
                }
            }
            let z: f64 = acc.iter().sum();
            if z <= 0.0 {
                return Err(Error::ZeroNormalizer);
            }
            for x in acc.iter_mut() {
                *x /= z;
            }
            next.insert(path, acc);
        }
        cur = next;
    }

    // Final vertex aggregation from the length-1 path beliefs.
    let des = DirectedEdgeSpace::new(g);
    let mut out = BeliefState {
        k,
        edge: vec![0.0; des.count() * k],
        vertex: vec![0.0; g.n() * k],
        signed: false,
    };
    for d in 0..des.count() as u32 {
        let key = vec![des.tail(d), des.head(d)];
        let belief = cur.get(&key).cloned().unwrap_or_else(|| params.prior().to_vec());
        out.edge_belief_mut(d).copy_from_slice(&belief);
    }
    for v in 0..g.n() {
        let beliefs: Vec<&[f64]> =
            des.out_edges(v).iter().map(|&f| out.edge_belief(f)).collect();
        let post = posterior_from_neighbors(params, &beliefs)?;
        out.vertex_belief_mut(v).copy_from_slice(&post);
    }
    Ok(out)
}

/// Shared epsilon recursion of the linearized algorithms. Updates edges
/// always; vertex coordinates and non-edge terms only in adjusted mode.
fn linearized_rounds(
    rounds: usize,
    eps_edge: &mut Vec<f64>,
    eps_vertex: &mut Vec<f64>,
    params: &ModelParams,
    g: &Graph,
    des: &DirectedEdgeSpace,
    adjusted: bool,
) {
    let k = params.k();
    let n = g.n();
    let nf = n as f64;
    let ne = des.count();
    let d = params.d();
    for _ in 0..rounds {
        // Aggregate incoming epsilons per vertex (over out-edges of the
        // vertex, which carry beliefs about its neighbors).
        let mut edge_next = vec![0.0f64; ne * k];
        let mut vert_next = vec![0.0f64; n * k];
        let mut s_out = vec![0.0f64; n * k];
        for dd in 0..ne as u32 {
            let tail = des.tail(dd) as usize;
            for i in 0..k {
                s_out[tail * k + i] += eps_edge[dd as usize * k + i];
            }
        }
        let mut total = vec![0.0f64; k];
        let mut s_nbr = vec![0.0f64; n * k];
        if adjusted {
            for v in 0..n {
                for i in 0..k {
                    total[i] += eps_vertex[v * k + i];
                }
            }
            for v in 0..n {
                for &u in g.neighbors(v) {
                    for i in 0..k {
                        s_nbr[v * k + i] += eps_vertex[u as usize * k + i];
                    }
                }
            }
        }
        for dd in 0..ne as u32 {
            let vprime = des.head(dd) as usize;
            let back = des.reverse(dd) as usize;
            let mut agg: Vec<f64> = (0..k)
                .map(|i| (s_out[vprime * k + i] - eps_edge[back * k + i]) / d)
                .collect();
            if adjusted {
                for (i, a) in agg.iter_mut().enumerate() {
                    *a -= (total[i] - s_nbr[vprime * k + i] - eps_vertex[vprime * k + i]) / nf;
                }
            }
            let pq = params.pq_times(&agg);
            edge_next[dd as usize * k..(dd as usize + 1) * k].copy_from_slice(&pq);
        }
        if adjusted {
            for v in 0..n {
                let mut agg: Vec<f64> = (0..k).map(|i| s_out[v * k + i] / d).collect();
                for (i, a) in agg.iter_mut().enumerate() {
                    *a -= (total[i] - s_nbr[v * k + i] - eps_vertex[v * k + i]) / nf;
                }
                let pq = params.pq_times(&agg);
                vert_next[v * k..(v + 1) * k].copy_from_slice(&pq);
            }
        }
        *eps_edge = edge_next;
        if adjusted {
            *eps_vertex = vert_next;
        }
    }
}

fn finalize_linearized(
    eps_edge: &[f64],
    eps_vertex: &[f64],
    params: &ModelParams,
    g: &Graph,
    des: &DirectedEdgeSpace,
    adjusted: bool,
) -> BeliefState {
    let k = params.k();
    let n = g.n();
    let nf = n as f64;
    let d = params.d();
    let mut vertex = vec![0.0f64; n * k];
    let mut total = vec![0.0f64; k];
    let mut s_nbr = vec![0.0f64; n * k];
    if adjusted {
        for v in 0..n {
            for i in 0..k {
                total[i] += eps_vertex[v * k + i];
            }
        }
        for v in 0..n {
            for &u in g.neighbors(v) {
                for i in 0..k {
                    s_nbr[v * k + i] += eps_vertex[u as usize * k + i];
                }
            }
        }
    }
    for v in 0..n {
        let mut agg = vec![0.0f64; k];
        for &f in des.out_edges(v) {
            for i in 0..k {
                agg[i] += eps_edge[f as usize * k + i];
            }
        }
        for a in agg.iter_mut() {
            *a /= d;
        }
        if adjusted {
            for (i, a) in agg.iter_mut().enumerate() {
                *a -= (total[i] - s_nbr[v * k + i] - eps_vertex[v * k + i]) / nf;
            }
        }
        let pq = params.pq_times(&agg);
        for i in 0..k {
            vertex[v * k + i] = params.prior()[i] + pq[i];
        }
    }
    let mut edge = vec![0.0f64; eps_edge.len()];
    for (slot, (e, pi)) in edge.iter_mut().zip(
        eps_edge
            .iter()
            .zip(params.prior().iter().cycle()),
    ) {
        *slot = e + pi;
    }
    BeliefState { k, edge, vertex, signed: true }
}

/// Linearized BP: iterate `eps <- sum PQ eps / d` over edge messages and
/// finish with the vertex aggregation `q = p + sum PQ eps / d`. Outputs
/// are signed beliefs (entries may leave `[0, 1]`).
pub fn linearized_bp(
    t: usize,
    q0: &BeliefState,
    params: &ModelParams,
    g: &Graph,
) -> Result<BeliefState> {
    if t == 0 {
        return Err(Error::InvalidParams("t must be at least 1".into()));
    }
    check_edge_state(g, params, q0)?;
    let des = DirectedEdgeSpace::new(g);
    let k = params.k();
    let mut eps_edge: Vec<f64> = q0
        .edge
        .iter()
        .zip(params.prior().iter().cycle())
        .map(|(q, p)| q - p)
        .collect();
    let mut eps_vertex = vec![0.0f64; g.n() * k];
    linearized_rounds(t - 1, &mut eps_edge, &mut eps_vertex, params, g, &des, false);
    Ok(finalize_linearized(&eps_edge, &eps_vertex, params, g, &des, false))
}

/// Adjusted linearized BP: edge and vertex epsilons evolve jointly, the
/// non-edge correction entering as `- sum PQ eps_u / n` over
/// non-neighbors (computed as total minus exclusions).
pub fn adjusted_linearized_bp(
    t: usize,
    q0: &BeliefState,
    params: &ModelParams,
    g: &Graph,
) -> Result<BeliefState> {
    if t == 0 {
        return Err(Error::InvalidParams("t must be at least 1".into()));
    }
    check_edge_state(g, params, q0)?;
    let want_v = g.n() * params.k();
    if q0.vertex.len() != want_v {
        return Err(Error::DimensionMismatch { expected: want_v, got: q0.vertex.len() });
    }
    let des = DirectedEdgeSpace::new(g);
    let mut eps_edge: Vec<f64> = q0
        .edge
        .iter()
        .zip(params.prior().iter().cycle())
        .map(|(q, p)| q - p)
        .collect();
    let mut eps_vertex: Vec<f64> = q0
        .vertex
        .iter()
        .zip(params.prior().iter().cycle())
        .map(|(q, p)| q - p)
        .collect();
    linearized_rounds(t - 1, &mut eps_edge, &mut eps_vertex, params, g, &des, true);
    Ok(finalize_linearized(&eps_edge, &eps_vertex, params, g, &des, true))
}

/// Check that `t` rounds of the adjusted linearized recursion equal `t`
/// applications of the Kronecker operator (adjusted nonbacktracking
/// across coordinates, `PQ` across communities) on the same start.
///
/// `eps0` is laid out coordinate-major: `(2|E| + n)` blocks of `k`
/// (edge coordinates first). Returns whether the maximum entrywise
/// deviation stays within `tol`, along with the deviation itself.
pub fn verify_tensor_identity(
    t: usize,
    eps0: &[f64],
    params: &ModelParams,
    g: &std::sync::Arc<Graph>,
    tol: f64,
) -> Result<(bool, f64)> {
    let bhat = operators::adjusted_nonbacktracking(g, params.d())?;
    let des = DirectedEdgeSpace::new(g);
    let k = params.k();
    let ne = des.count();
    let coords = ne + g.n();
    if eps0.len() != coords * k {
        return Err(Error::DimensionMismatch { expected: coords * k, got: eps0.len() });
    }

    // Route one: the belief-propagation recursion.
    let mut eps_edge = eps0[..ne * k].to_vec();
    let mut eps_vertex = eps0[ne * k..].to_vec();
    linearized_rounds(t, &mut eps_edge, &mut eps_vertex, params, g, &des, true);

    // Route two: t applications of the Kronecker-structured operator.
    let mut z = eps0.to_vec();
    let mut channel = vec![0.0f64; coords];
    let mut channel_out = vec![0.0f64; coords];
    for _ in 0..t {
        let mut mixed = vec![0.0f64; coords * k];
        for c in 0..coords {
            let pq = params.pq_times(&z[c * k..(c + 1) * k]);
            mixed[c * k..(c + 1) * k].copy_from_slice(&pq);
        }
        for i in 0..k {
            for c in 0..coords {
                channel[c] = mixed[c * k + i];
            }
            bhat.apply(&channel, &mut channel_out);
            for c in 0..coords {
                z[c * k + i] = channel_out[c];
            }
        }
    }

    let mut dev = 0.0f64;
    for c in 0..ne {
        for i in 0..k {
            dev = dev.max((z[c * k + i] - eps_edge[c * k + i]).abs());
        }
    }
    for v in 0..g.n() {
        for i in 0..k {
            dev = dev.max((z[(ne + v) * k + i] - eps_vertex[v * k + i]).abs());
        }
    }
    Ok((dev <= tol, dev))
}

/// Belief initialization schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BpInit {
    Prior,
    /// Prior plus a seeded zero-sum perturbation of infinity-norm `delta`.
    Random { delta: f64 },
    /// Bias the `sqrt(n)` highest-degree vertices toward community 1 by
    /// `(4 pi^2 n)^(-1/4)`; everything else starts at the prior.
    HighDegree,
}

/// Build a starting belief state for the BP family.
pub fn init_beliefs(
    g: &Graph,
    params: &ModelParams,
    init: BpInit,
    seed: u64,
) -> Result<BeliefState> {
    let mut state = BeliefState::prior(g, params);
    let k = params.k();
    match init {
        BpInit::Prior => {}
        BpInit::Random { delta } => {
            let minp = params.prior().iter().copied().fold(f64::INFINITY, f64::min);
            if !(delta > 0.0) || delta >= minp {
                return Err(Error::InvalidParams(format!(
                    "perturbation delta must lie in (0, min prior = {minp})"
                )));
            }
            let mut rng = rng::stream(seed, "bp-init");
            let mut perturb = |block: &mut [f64]| {
                let mut u: Vec<f64> = (0..k).map(|_| rng.random::<f64>() - 0.5).collect();
                let mean = u.iter().sum::<f64>() / k as f64;
                let top = u
                    .iter()
                    .map(|x| (x - mean).abs())
                    .fold(0.0f64, f64::max)
                    .max(1e-12);
                for (b, x) in block.iter_mut().zip(&u) {
                    *b += (x - mean) / top * delta;
                }
                u.clear();
            };
            let ne = state.edge.len() / k;
            for d in 0..ne {
                perturb(&mut state.edge[d * k..(d + 1) * k]);
            }
            for v in 0..g.n() {
                perturb(&mut state.vertex[v * k..(v + 1) * k]);
            }
        }
        BpInit::HighDegree => {
            if k != 2 {
                return Err(Error::InvalidParams(
                    "high-degree anchoring is defined for two communities".into(),
                ));
            }
            let n = g.n();
            let anchors = (n as f64).sqrt().round() as usize;
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by_key(|&v| (std::cmp::Reverse(g.degree(v)), v));
            let bias = 1.0 / (4.0 * std::f64::consts::PI.powi(2) * n as f64).powf(0.25);
            let des = DirectedEdgeSpace::new(g);
            let mut anchored = vec![false; n];
            for &v in order.iter().take(anchors.max(1)) {
                anchored[v] = true;
                let b = state.vertex_belief_mut(v);
                b[0] += bias;
                b[1] -= bias;
            }
            for d in 0..des.count() as u32 {
                // The message on (v, v') is about v'.
                if anchored[des.head(d) as usize] {
                    let b = state.edge_belief_mut(d);
                    b[0] += bias;
                    b[1] -= bias;
                }
            }
        }
    }
    Ok(state)
}
