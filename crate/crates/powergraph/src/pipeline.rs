//! The spectral meta-algorithm: clean the graph (degree cap, leaf
//! peeling, isolated-segment removal, giant extraction), raise it to the
//! r-th power, normalize to the random walk matrix, and split on the
//! second eigenvector.
//!
//! Cleaning deletes simultaneously within each sub-step and re-evaluates
//! degrees between sub-steps, which makes it order-independent and
//! idempotent. The powering order defaults to `r = max(2,
//! round(c * ln^3(diam)))` measured on the cleaned graph; a square-root
//! rule and an explicit override are also available.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Diameter, Graph};
use crate::operators::{self, ClassicalKind, ClassicalOp};
use crate::spectral::{self, Partition};

/// What cleaning deleted and what survived.
#[derive(Debug, Clone, Serialize)]
pub struct CleaningReport {
    pub deleted_high_degree: usize,
    /// Peeling iterations that removed at least one leaf.
    pub leaf_rounds: usize,
    pub deleted_leaves: usize,
    pub deleted_segment_vertices: usize,
    pub deleted_non_giant: usize,
    pub final_n: usize,
    pub final_m: usize,
    /// Original vertex id -> surviving id; `None` for deleted vertices.
    #[serde(skip)]
    pub old_to_new: Vec<Option<u32>>,
}

fn alive_ball_all_low_degree(
    g: &Graph,
    start: u32,
    radius: usize,
    alive: &[bool],
    degree: &[usize],
    dist: &mut [u32],
    touched: &mut Vec<u32>,
    queue: &mut VecDeque<u32>,
) -> bool {
    queue.clear();
    dist[start as usize] = 0;
    touched.push(start);
    queue.push_back(start);
    let mut all_low = degree[start as usize] <= 2;
    while let Some(v) = queue.pop_front() {
        if !all_low {
            break;
        }
        let d = dist[v as usize];
        if d as usize >= radius {
            continue;
        }
        for &u in g.neighbors(v as usize) {
            if alive[u as usize] && dist[u as usize] == u32::MAX {
                dist[u as usize] = d + 1;
                touched.push(u);
                queue.push_back(u);
                if degree[u as usize] > 2 {
                    all_low = false;
                }
            }
        }
    }
    for &u in touched.iter() {
        dist[u as usize] = u32::MAX;
    }
    touched.clear();
    all_low
}

/// Clean: (i) one-shot removal of vertices with degree above `tau`;
/// (ii) until fixpoint, remove all degree-at-most-1 vertices, then all
/// vertices whose entire floor(sqrt(r))-ball has degree at most 2, each
/// sub-step simultaneous with degrees refreshed in between; (iii) keep
/// the largest component.
pub fn clean(g: &Graph, tau: f64, r: usize) -> Result<(Graph, CleaningReport)> {
    if r == 0 {
        return Err(Error::InvalidR);
    }
    let n = g.n();
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();

    let mut report = CleaningReport {
        deleted_high_degree: 0,
        leaf_rounds: 0,
        deleted_leaves: 0,
        deleted_segment_vertices: 0,
        deleted_non_giant: 0,
        final_n: 0,
        final_m: 0,
        old_to_new: Vec::new(),
    };

    let delete = |v: usize, alive: &mut [bool], degree: &mut [usize]| {
        alive[v] = false;
        for &u in g.neighbors(v) {
            if alive[u as usize] {
                degree[u as usize] -= 1;
            }
        }
    };

    // Degree cap, one shot on original degrees.
    let capped: Vec<usize> = (0..n).filter(|&v| degree[v] as f64 > tau).collect();
    for &v in &capped {
        delete(v, &mut alive, &mut degree);
    }
    report.deleted_high_degree = capped.len();

    let radius = (r as f64).sqrt().floor() as usize;
    let mut dist = vec![u32::MAX; n];
    let mut touched = Vec::new();
    let mut queue = VecDeque::new();
    loop {
        let leaves: Vec<usize> = (0..n).filter(|&v| alive[v] && degree[v] <= 1).collect();
        for &v in &leaves {
            delete(v, &mut alive, &mut degree);
        }
        if !leaves.is_empty() {
            report.leaf_rounds += 1;
            report.deleted_leaves += leaves.len();
        }

        let segments: Vec<usize> = (0..n)
            .filter(|&v| {
                alive[v]
                    && alive_ball_all_low_degree(
                        g,
                        v as u32,
                        radius,
                        &alive,
                        &degree,
                        &mut dist,
                        &mut touched,
                        &mut queue,
                    )
            })
            .collect();
        for &v in &segments {
            delete(v, &mut alive, &mut degree);
        }
        report.deleted_segment_vertices += segments.len();

        if leaves.is_empty() && segments.is_empty() {
            break;
        }
    }

    if !alive.iter().any(|&a| a) {
        return Err(Error::EverythingDeleted);
    }

    // Keep the largest surviving component (ties toward the smallest id).
    let mut comp = vec![u32::MAX; n];
    let mut best: Option<(usize, u32)> = None; // (size, id)
    let mut next_id = 0u32;
    for s in 0..n {
        if !alive[s] || comp[s] != u32::MAX {
            continue;
        }
        let id = next_id;
        next_id += 1;
        comp[s] = id;
        let mut size = 1usize;
        queue.clear();
        queue.push_back(s as u32);
        while let Some(v) = queue.pop_front() {
            for &u in g.neighbors(v as usize) {
                if alive[u as usize] && comp[u as usize] == u32::MAX {
                    comp[u as usize] = id;
                    size += 1;
                    queue.push_back(u);
                }
            }
        }
        if best.map_or(true, |(bs, _)| size > bs) {
            best = Some((size, id));
        }
    }
    let (giant_size, giant_id) = best.expect("some vertex is alive");
    let alive_total = alive.iter().filter(|&&a| a).count();
    report.deleted_non_giant = alive_total - giant_size;
    let keep: Vec<bool> = (0..n).map(|v| alive[v] && comp[v] == giant_id).collect();
    let sub = g.induced_subgraph(&keep);
    report.final_n = sub.graph.n();
    report.final_m = sub.graph.m();
    report.old_to_new = sub.old_to_new;
    Ok((sub.graph, report))
}

/// Rule choosing the powering order from the cleaned graph's diameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RRule {
    /// `r = max(2, round(c * ln^3(diam)))`.
    LogCube { c: f64 },
    /// `r = max(2, round(sqrt(diam)))`.
    SqrtDiam,
}

impl RRule {
    fn resolve(&self, diam: usize) -> usize {
        let d = (diam as f64).max(2.0);
        let raw = match *self {
            RRule::LogCube { c } => c * d.ln().powi(3),
            RRule::SqrtDiam => d.sqrt(),
        };
        (raw.round() as usize).max(2)
    }
}

pub const DEFAULT_POWERING_COEFF: f64 = 0.25;

/// Parameters of the meta-algorithm. `tau = None` defaults to
/// `10 * (1 + average degree)`; `r_override` bypasses the diameter rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiParams {
    pub tau: Option<f64>,
    pub rule: RRule,
    pub r_override: Option<usize>,
}

impl Default for PsiParams {
    fn default() -> Self {
        PsiParams { tau: None, rule: RRule::LogCube { c: DEFAULT_POWERING_COEFF }, r_override: None }
    }
}

/// Everything the pipeline produced, for inspection.
pub struct PsiOutput {
    /// `D^-1 A` of the powered cleaned graph.
    pub op: ClassicalOp,
    pub powered: Arc<Graph>,
    pub cleaned: Arc<Graph>,
    pub report: CleaningReport,
    pub r: usize,
    pub tau: f64,
    /// Diameter of the cleaned graph that determined `r`.
    pub diameter: Diameter,
}

/// Cleaning -> powering -> normalizing.
///
/// The diameter that feeds the r-rule is measured on the cleaned graph.
/// Since cleaning itself needs `r` (segment radius), a provisional `r`
/// from the input giant's diameter drives the first cleaning pass; if the
/// rule then disagrees on the cleaned diameter, the original graph is
/// re-cleaned once with the final `r`.
pub fn psi(g: &Graph, params: &PsiParams) -> Result<PsiOutput> {
    if g.n() == 0 {
        return Err(Error::EmptyGraph);
    }
    let tau = params.tau.unwrap_or_else(|| 10.0 * (1.0 + g.average_degree()));

    let (cleaned, report, r, diam) = match params.r_override {
        Some(r) => {
            if r == 0 {
                return Err(Error::InvalidR);
            }
            let (cleaned, report) = clean(g, tau, r)?;
            let diam = cleaned.diameter()?;
            (cleaned, report, r, diam)
        }
        None => {
            let giant = g.largest_component()?;
            let provisional = params.rule.resolve(giant.graph.diameter()?.value);
            let (cleaned, report) = clean(g, tau, provisional)?;
            let diam = cleaned.diameter()?;
            let r = params.rule.resolve(diam.value);
            if r == provisional {
                (cleaned, report, r, diam)
            } else {
                let (cleaned, report) = clean(g, tau, r)?;
                let diam = cleaned.diameter()?;
                (cleaned, report, r, diam)
            }
        }
    };

    let cleaned = Arc::new(cleaned);
    let powered = Arc::new(operators::graph_power(&cleaned, r)?);
    let op = operators::classical_operator(&powered, ClassicalKind::RandomWalk)?;
    Ok(PsiOutput { op, powered, cleaned, report, r, tau, diameter: diam })
}

/// Output of [`meta_cluster`].
pub struct MetaOutcome {
    pub partition: Partition,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r: usize,
    pub report: CleaningReport,
}

/// The full meta-algorithm: run [`psi`], take the eigenvector of the
/// second largest eigenvalue, assign positive entries to community 1,
/// then give deleted vertices the majority label of their surviving
/// neighbors in the original graph (seeded coin on ties).
pub fn meta_cluster(g: &Arc<Graph>, params: &PsiParams, seed: u64) -> Result<MetaOutcome> {
    let out = psi(g, params)?;
    let pairs = spectral::top_eigs_general(&out.op, 2, spectral::DEFAULT_TOL, 20_000, seed)?;
    let second = &pairs[1];
    let cleaned_partition = spectral::round_sign(&second.vector);

    let mut assigned: Vec<Option<u32>> = vec![None; g.n()];
    for (old, new) in out.report.old_to_new.iter().enumerate() {
        if let Some(new) = new {
            assigned[old] = Some(cleaned_partition.labels()[*new as usize]);
        }
    }
    spectral::backfill_labels(g, &mut assigned, 2, seed);
    let labels: Vec<u32> = assigned.into_iter().map(|l| l.unwrap()).collect();
    let partition = Partition::new(labels, 2)?;

    Ok(MetaOutcome {
        partition,
        eigenvalues: pairs.iter().map(|p| p.value).collect(),
        residuals: pairs.iter().map(|p| p.residual).collect(),
        r: out.r,
        report: out.report,
    })
}

/// Weighted powering: connect vertices within `r` hops, weighting the new
/// edge by the strongest simple path between them, where a path of `L`
/// hops scores `product(edge weights) / c^(L-1)` (a single edge keeps its
/// own weight). Exhaustive search over simple paths; cost grows like
/// `n * max_degree^r`.
pub fn weighted_power(g: &Graph, r: usize, c: f64) -> Result<Graph> {
    if r == 0 {
        return Err(Error::InvalidParams("powering order r must be at least 1".into()));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParams(format!("reference weight must be positive, got {c}")));
    }
    let n = g.n();
    let weight_of = |v: usize, idx: usize| -> f64 {
        g.neighbor_weights(v).map_or(1.0, |ws| ws[idx])
    };

    let mut best_edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut best = vec![f64::NEG_INFINITY; n];
    let mut on_path = vec![false; n];
    for source in 0..n {
        for b in best.iter_mut() {
            *b = f64::NEG_INFINITY;
        }
        // DFS over simple paths of at most r edges, tracking the score.
        let mut stack: Vec<(usize, usize, f64)> = vec![(source, 0, 1.0)];
        on_path[source] = true;
        while let Some(&(v, cursor, score)) = stack.last() {
            let depth = stack.len() - 1;
            let ns = g.neighbors(v);
            if depth == r || cursor >= ns.len() {
                on_path[v] = false;
                stack.pop();
                continue;
            }
            stack.last_mut().unwrap().1 += 1;
            let u = ns[cursor] as usize;
            if on_path[u] {
                continue;
            }
            // Path score with one more hop: multiply the edge weight and
            // divide by c for every hop beyond the first.
            let next_score =
                if depth == 0 { score * weight_of(v, cursor) } else { score * weight_of(v, cursor) / c };
            if next_score > best[u] {
                best[u] = next_score;
            }
            on_path[u] = true;
            stack.push((u, 0, next_score));
        }
        for (u, &b) in best.iter().enumerate() {
            if u > source && b > f64::NEG_INFINITY {
                best_edges.push((source, u, b));
            }
        }
    }
    Graph::build_weighted(n, &best_edges)
}

fn leaf_like_vertices(g: &Graph, alive: &[bool], frac: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for v in 0..g.n() {
        if !alive[v] {
            continue;
        }
        let mut total = 0.0;
        let mut max_w = 0.0f64;
        let mut deg = 0usize;
        for (idx, &u) in g.neighbors(v).iter().enumerate() {
            if alive[u as usize] {
                let w = g.neighbor_weights(v).map_or(1.0, |ws| ws[idx]);
                total += w;
                max_w = max_w.max(w);
                deg += 1;
            }
        }
        if deg >= 1 && max_w >= frac * total {
            out.push(v);
        }
    }
    out
}

/// Centers of weight-isolated paths with exactly `len` edges: every
/// interior vertex carries at least `frac` of its alive edge weight on
/// its two path edges.
fn isolated_path_centers(g: &Graph, alive: &[bool], frac: f64, len: usize) -> Vec<usize> {
    let n = g.n();
    let mut totals = vec![0.0f64; n];
    for v in 0..n {
        if alive[v] {
            for (idx, &u) in g.neighbors(v).iter().enumerate() {
                if alive[u as usize] {
                    totals[v] += g.neighbor_weights(v).map_or(1.0, |ws| ws[idx]);
                }
            }
        }
    }
    let weight_of = |v: usize, idx: usize| -> f64 {
        g.neighbor_weights(v).map_or(1.0, |ws| ws[idx])
    };
    let mut centers: Vec<usize> = Vec::new();
    let mut on_path = vec![false; n];
    for source in 0..n {
        if !alive[source] {
            continue;
        }
        // DFS over alive simple paths; prune as soon as an interior
        // vertex violates the concentration condition.
        let mut path: Vec<usize> = vec![source];
        let mut in_w: Vec<f64> = vec![0.0];
        let mut cursors: Vec<usize> = vec![0];
        on_path[source] = true;
        while let Some(&v) = path.last() {
            let depth = path.len() - 1;
            if depth == len {
                centers.push(path[len / 2]);
                on_path[v] = false;
                path.pop();
                in_w.pop();
                cursors.pop();
                continue;
            }
            let ns = g.neighbors(v);
            let cursor = *cursors.last().unwrap();
            if cursor >= ns.len() {
                on_path[v] = false;
                path.pop();
                in_w.pop();
                cursors.pop();
                continue;
            }
            *cursors.last_mut().unwrap() += 1;
            let u = ns[cursor] as usize;
            if !alive[u] || on_path[u] {
                continue;
            }
            let w = weight_of(v, cursor);
            // v becomes interior once it has both path edges.
            if depth >= 1 {
                let concentrated = in_w[depth] + w >= frac * totals[v];
                if !concentrated {
                    continue;
                }
            }
            on_path[u] = true;
            path.push(u);
            in_w.push(w);
            cursors.push(0);
        }
    }
    centers.sort_unstable();
    centers.dedup();
    centers
}

/// Weighted cleaning: repeatedly delete leaf-like vertices (at least
/// `1 - 1/sqrt(r)` of the incident weight on a single edge) and the
/// center vertices of weight-isolated paths of `2*floor(sqrt(r)) + 2`
/// edges, until neither rule fires. Requires `r >= 4`.
pub fn weighted_clean(g: &Graph, r: usize) -> Graph {
    assert!(r >= 4, "weighted cleaning requires r >= 4");
    let frac = 1.0 - 1.0 / (r as f64).sqrt();
    let len = 2 * ((r as f64).sqrt().floor() as usize) + 2;
    let mut alive = vec![true; g.n()];
    loop {
        let leaves = leaf_like_vertices(g, &alive, frac);
        for &v in &leaves {
            alive[v] = false;
        }
        let centers = isolated_path_centers(g, &alive, frac, len);
        for &v in &centers {
            alive[v] = false;
        }
        if leaves.is_empty() && centers.is_empty() {
            break;
        }
    }
    g.induced_subgraph(&alive).graph
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::LinearOp;
    use crate::rng;
    use rand::Rng;

    fn cycle(n: usize) -> Graph {
        Graph::build(n, &(0..n).map(|i| (i, (i + 1) % n)).collect::<Vec<_>>()).unwrap()
    }

    fn star(leaves: usize) -> Graph {
        Graph::build(leaves + 1, &(1..=leaves).map(|v| (0, v)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn star_cleans_to_nothing() {
        let g = star(5);
        assert!(matches!(clean(&g, f64::INFINITY, 4), Err(Error::EverythingDeleted)));
    }

    #[test]
    fn bare_cycle_cleans_to_nothing() {
        // Every vertex's 4-ball is all degree 2.
        let g = cycle(100);
        assert!(matches!(clean(&g, f64::INFINITY, 16), Err(Error::EverythingDeleted)));
    }

    #[test]
    fn lollipop_keeps_the_clique() {
        // K5 on {0..4} plus a 20-vertex pendant path hanging off vertex 0.
        let mut edges = Vec::new();
        for u in 0..5 {
            for v in u + 1..5 {
                edges.push((u, v));
            }
        }
        edges.push((0, 5));
        for v in 5..24 {
            edges.push((v, v + 1));
        }
        let g = Graph::build(25, &edges).unwrap();
        let (cleaned, report) = clean(&g, f64::INFINITY, 16).unwrap();
        assert_eq!(cleaned.n(), 5);
        assert_eq!(cleaned.m(), 10);
        assert_eq!(report.final_n, 5);
        assert!(report.deleted_leaves + report.deleted_segment_vertices == 20);
        for v in 0..5 {
            assert!(report.old_to_new[v].is_some());
        }
    }

    #[test]
    fn degree_cap_fires_once() {
        let g = star(8);
        // Center has degree 8 > tau; leaves then become isolated and die.
        let err = clean(&g, 5.0, 4);
        assert!(matches!(err, Err(Error::EverythingDeleted)));
    }

    fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
        let mut rng = rng::stream(seed, "pipeline-random");
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        Graph::build(n, &edges).unwrap()
    }

    #[test]
    fn clean_is_idempotent_and_leaves_no_violations() {
        for seed in 0..6 {
            let g = random_graph(120, 0.025, seed);
            let tau = 9.0;
            let r = 9;
            let Ok((once, report)) = clean(&g, tau, r) else {
                continue;
            };
            // Post-conditions on the survivor.
            let radius = 3; // floor(sqrt(9))
            for v in 0..once.n() {
                assert!(once.degree(v) as f64 <= tau);
                assert!(once.degree(v) >= 2);
                let ball = once.bfs_distances(v, radius).unwrap();
                assert!(
                    ball.keys().any(|&u| once.degree(u as usize) > 2),
                    "seed {seed}: vertex {v} sits in an all-low-degree ball"
                );
            }
            // Degrees never increase.
            for v in 0..g.n() {
                if let Some(new) = report.old_to_new[v] {
                    assert!(once.degree(new as usize) <= g.degree(v));
                }
            }
            // Counts reconcile.
            assert_eq!(
                g.n() - report.final_n,
                report.deleted_high_degree
                    + report.deleted_leaves
                    + report.deleted_segment_vertices
                    + report.deleted_non_giant
            );
            // Idempotence.
            let (twice, report2) = clean(&once, tau, r).unwrap();
            assert_eq!(twice.n(), once.n());
            assert_eq!(twice.edges(), once.edges());
            assert_eq!(report2.deleted_leaves, 0);
            assert_eq!(report2.deleted_segment_vertices, 0);
        }
    }

    #[test]
    fn psi_on_clean_regular_graph_is_identity_cleaning() {
        // Petersen graph: 3-regular, girth 5.
        let g = petersen();
        let params = PsiParams {
            tau: None,
            rule: RRule::LogCube { c: DEFAULT_POWERING_COEFF },
            r_override: Some(2),
        };
        let out = psi(&g, &params).unwrap();
        assert_eq!(out.report.final_n, 10);
        assert_eq!(out.report.deleted_leaves, 0);
        assert_eq!(out.report.deleted_segment_vertices, 0);
        // Row-stochastic operator fixes the all-ones vector.
        let y = out.op.apply_vec(&vec![1.0; 10]);
        assert!(y.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        // Petersen has diameter 2, so its square is complete.
        assert_eq!(out.powered.m(), 45);
    }

    pub(crate) fn petersen() -> Graph {
        let outer = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)];
        let spokes = [(0, 5), (1, 6), (2, 7), (3, 8), (4, 9)];
        let inner = [(5, 7), (7, 9), (9, 6), (6, 8), (8, 5)];
        let edges: Vec<(usize, usize)> =
            outer.iter().chain(&spokes).chain(&inner).copied().collect();
        Graph::build(10, &edges).unwrap()
    }

    #[test]
    fn psi_operator_dimension_matches_cleaned_giant() {
        let lg = crate::generators::gen_sbm_sym(2000, 6.0, 1.0, 5).unwrap();
        let params =
            PsiParams { tau: Some(50.0), rule: RRule::SqrtDiam, r_override: Some(3) };
        let out = psi(&lg.graph, &params).unwrap();
        // Replay the pipeline by hand.
        let (cleaned, _) = clean(&lg.graph, 50.0, 3).unwrap();
        assert_eq!(out.op.dim(), cleaned.n());
        assert_eq!(out.cleaned.n(), cleaned.n());
    }

    #[test]
    fn meta_cluster_recovers_two_cliques() {
        let mut edges = Vec::new();
        for u in 0..12 {
            for v in u + 1..12 {
                edges.push((u, v));
                edges.push((u + 12, v + 12));
            }
        }
        edges.push((0, 12));
        let g = Arc::new(Graph::build(24, &edges).unwrap());
        let truth =
            Partition::new((0..24).map(|v| if v < 12 { 1 } else { 2 }).collect(), 2).unwrap();
        // With powering disabled (r = 1) the sign split is exact.
        let exact = PsiParams { r_override: Some(1), ..PsiParams::default() };
        let out = meta_cluster(&g, &exact, 3).unwrap();
        assert_eq!(spectral::agreement(&truth, &out.partition).unwrap(), 1.0);
        // The default r = 2 makes the bridge endpoints twins in the
        // powered graph; everything else still splits exactly, so exactly
        // one of the 24 vertices lands on the wrong side.
        let out = meta_cluster(&g, &PsiParams::default(), 3).unwrap();
        let labels = out.partition.labels();
        assert_eq!(labels[0], labels[12]);
        assert!((1..12).all(|v| labels[v] == labels[1]));
        assert!((13..24).all(|v| labels[v] == labels[13]));
        assert_ne!(labels[1], labels[13]);
    }

    #[test]
    fn weighted_power_topology_matches_unweighted_power() {
        let g = random_graph(40, 0.08, 11);
        let weighted = {
            let edges: Vec<(usize, usize, f64)> = g
                .edges()
                .iter()
                .map(|&(u, v)| (u as usize, v as usize, 2.5))
                .collect();
            Graph::build_weighted(40, &edges).unwrap()
        };
        for r in 1..=3 {
            let wp = weighted_power(&weighted, r, 2.5).unwrap();
            let up = operators::graph_power(&g, r).unwrap();
            assert_eq!(wp.edges(), up.edges(), "r = {r}");
            // Pure topology: every path of equal weights scores c.
            for &w in wp.edge_weights().unwrap() {
                assert!((w - 2.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weighted_power_r1_is_identity() {
        let g = Graph::build_weighted(3, &[(0, 1, 2.0), (1, 2, 3.0)]).unwrap();
        let p = weighted_power(&g, 1, 1.0).unwrap();
        assert_eq!(p.edges(), g.edges());
        assert_eq!(p.edge_weights().unwrap(), g.edge_weights().unwrap());
    }

    #[test]
    fn weighted_power_multiplies_along_the_path() {
        let g = Graph::build_weighted(3, &[(0, 1, 2.0), (1, 2, 3.0)]).unwrap();
        let p = weighted_power(&g, 2, 1.0).unwrap();
        assert_eq!(p.edges(), &[(0, 1), (0, 2), (1, 2)]);
        let w02 = p.edge_weights().unwrap()[1];
        assert!((w02 - 6.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_power_takes_strongest_path() {
        // Two routes from 0 to 3: strong (0-1-3, product 9) and weak
        // (0-2-3, product 1).
        let g = Graph::build_weighted(
            4,
            &[(0, 1, 3.0), (1, 3, 3.0), (0, 2, 1.0), (2, 3, 1.0)],
        )
        .unwrap();
        let p = weighted_power(&g, 2, 1.0).unwrap();
        let idx = p.edges().iter().position(|&(u, v)| (u, v) == (0, 3)).unwrap();
        assert!((p.edge_weights().unwrap()[idx] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn leaf_like_rule_on_equal_weights_reduces_to_degree_one() {
        let g = cycle(20);
        let alive = vec![true; 20];
        let frac = 1.0 - 1.0 / 4.0; // r = 16
        assert!(leaf_like_vertices(&g, &alive, frac).is_empty());
        let p = Graph::build_weighted(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let alive = vec![true; 3];
        assert_eq!(leaf_like_vertices(&p, &alive, frac), vec![0, 2]);
    }

    #[test]
    fn weighted_clean_deletes_heavy_leaf_center() {
        // Star with one heavy edge and nine light ones: the center
        // concentrates > 1 - 1/sqrt(16) of its weight on one edge.
        let mut edges = vec![(0usize, 1usize, 100.0)];
        for v in 2..=10 {
            edges.push((0, v, 0.01));
        }
        let g = Graph::build_weighted(11, &edges).unwrap();
        let cleaned = weighted_clean(&g, 16);
        // Center deleted as leaf-like; everything else unravels with it.
        assert_eq!(cleaned.n(), 0);
    }

    #[test]
    fn weighted_clean_keeps_weight_balanced_core() {
        // Clique with equal weights: no vertex is leaf-like and no path
        // is weight-isolated.
        let mut edges = Vec::new();
        for u in 0..6 {
            for v in u + 1..6 {
                edges.push((u, v, 1.0));
            }
        }
        let g = Graph::build_weighted(6, &edges).unwrap();
        let cleaned = weighted_clean(&g, 16);
        assert_eq!(cleaned.n(), 6);
        assert_eq!(cleaned.m(), 15);
    }
}
