//! Alon-Boppana machinery for powered graphs: the modified minimum
//! degrees `delta^(i)`, their geometric aggregate `dhat_r`, the lower
//! bound `(r+1) * dhat_r^(r/2)`, exact closed-walk counts `t_2k`, the
//! finite closed-walk inequality `lambda_2(G^(r))^(2k) >= t_2k`, the
//! even-composition multinomial inequality, and the girth-limited
//! recursion `A^(r) = A A^(r-1) - (d-1) A^(r-2)` as an independent oracle
//! for powering.
//!
//! Walk counts and the recursion run in exact integer arithmetic; the
//! closed-walk inequality is asserted with a 1e-8 relative slack on the
//! floating eigenvalue side only.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::operators::{self, ClassicalKind, SparseSymMatrix};
use crate::spectral;

/// Everything the bound evaluation produces, serialized by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct AbReport {
    pub r: usize,
    /// `delta^(0..=r)`.
    pub delta: Vec<u64>,
    pub dhat: f64,
    /// `(r + 1) * dhat^(r/2)`.
    pub lower_bound: f64,
    pub lambda2: f64,
    pub k_used: usize,
    /// Exact closed-walk minimum, decimal string (arbitrary precision).
    pub t2k: String,
    pub inequality_holds: bool,
}

/// `delta^(i)` for all `i in 0..=r` in one pass: the minimum over both
/// orientations of every edge `(x, y)` of
/// `|{v : d(x, v) = i and d(y, v) >= i}|`.
pub fn delta_profile(g: &Graph, r: usize) -> Result<Vec<u64>> {
    if g.m() == 0 {
        return Err(Error::NoEdges);
    }
    let n = g.n();
    let mut delta = vec![u64::MAX; r + 1];
    let mut dist_x = vec![u32::MAX; n];
    let mut dist_y = vec![u32::MAX; n];
    let mut touched_x = Vec::new();
    let mut touched_y = Vec::new();
    let mut queue = VecDeque::new();
    let mut counts = vec![0u64; r + 1];
    for &(a, b) in g.edges() {
        for (x, y) in [(a, b), (b, a)] {
            g.bfs_scratch(x, r as u32, &mut dist_x, &mut touched_x, &mut queue);
            g.bfs_scratch(y, r as u32, &mut dist_y, &mut touched_y, &mut queue);
            counts.fill(0);
            for &v in &touched_x {
                let dx = dist_x[v as usize] as usize;
                // Unreached within radius r means d(y, v) > r >= i.
                let dy = dist_y[v as usize];
                if dy == u32::MAX || dy as usize >= dx {
                    counts[dx] += 1;
                }
            }
            for i in 0..=r {
                delta[i] = delta[i].min(counts[i]);
            }
            for &v in &touched_x {
                dist_x[v as usize] = u32::MAX;
            }
            for &v in &touched_y {
                dist_y[v as usize] = u32::MAX;
            }
            touched_x.clear();
            touched_y.clear();
        }
    }
    Ok(delta)
}

/// `delta^(i)` alone.
pub fn delta_i(g: &Graph, i: usize) -> Result<u64> {
    Ok(delta_profile(g, i)?[i])
}

fn dhat_from_profile(delta: &[u64]) -> f64 {
    let r = delta.len() - 1;
    let sum: f64 = (0..=r)
        .map(|i| ((delta[i] as f64) * (delta[r - i] as f64)).sqrt())
        .sum();
    (sum / (r + 1) as f64).powf(2.0 / r as f64)
}

/// `dhat_r = ((1/(r+1)) * sum_i sqrt(delta^(i) delta^(r-i)))^(2/r)`.
pub fn dhat_r(g: &Graph, r: usize) -> Result<f64> {
    if r == 0 {
        return Err(Error::InvalidR);
    }
    Ok(dhat_from_profile(&delta_profile(g, r)?))
}

/// The lower-bound side `(r+1) * dhat_r^(r/2)`. The vanishing asymptotic
/// factor is not applied; reports are side by side, not assertions.
pub fn ab_lower_bound(g: &Graph, r: usize) -> Result<f64> {
    let dhat = dhat_r(g, r)?;
    Ok((r as f64 + 1.0) * dhat.powf(r as f64 / 2.0))
}

/// Exact minimum over vertices of closed walks of length `2k` in the
/// r-th graph power, computed in arbitrary-precision integers as
/// `min_v ||A^k e_v||^2` on the powered adjacency.
pub fn t2k(g: &Graph, r: usize, k: usize) -> Result<BigUint> {
    if r == 0 || k == 0 {
        return Err(Error::InvalidParams("need r >= 1 and k >= 1".into()));
    }
    let powered = operators::graph_power(g, r)?;
    let n = powered.n();
    let nnz = 2 * powered.m();
    let cost = n as f64 * k as f64 * nnz as f64;
    if cost > 5e8 {
        return Err(Error::TooLarge(format!(
            "t2k cost n*k*nnz = {cost:.3e} exceeds 5e8"
        )));
    }
    let mut best: Option<BigUint> = None;
    let mut x: Vec<BigUint> = vec![BigUint::zero(); n];
    let mut y: Vec<BigUint> = vec![BigUint::zero(); n];
    for v in 0..n {
        for xi in x.iter_mut() {
            *xi = BigUint::zero();
        }
        x[v] = BigUint::one();
        for _ in 0..k {
            for (u, slot) in y.iter_mut().enumerate() {
                let mut acc = BigUint::zero();
                for &w in powered.neighbors(u) {
                    acc += &x[w as usize];
                }
                *slot = acc;
            }
            std::mem::swap(&mut x, &mut y);
        }
        let walks: BigUint = x.iter().map(|c| c * c).sum();
        best = Some(match best {
            None => walks,
            Some(b) => b.min(walks),
        });
    }
    Ok(best.expect("graph has vertices"))
}

const DENSE_LAMBDA_LIMIT: usize = 2000;

fn lambda2_of_powered(powered: &Graph) -> Result<f64> {
    let n = powered.n();
    if n < 2 {
        return Err(Error::PreconditionViolated("need at least two vertices".into()));
    }
    if n <= DENSE_LAMBDA_LIMIT {
        let mut a = DMatrix::<f64>::zeros(n, n);
        for &(u, v) in powered.edges() {
            a[(u as usize, v as usize)] = 1.0;
            a[(v as usize, u as usize)] = 1.0;
        }
        let eig = nalgebra::SymmetricEigen::new(a);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
        Ok(vals[1])
    } else {
        let arc = std::sync::Arc::new(powered.clone());
        let op = operators::classical_operator(&arc, ClassicalKind::Adjacency)?;
        let pairs = spectral::top_eigs_symmetric(&op, 2, 1e-10, 100_000, 0x5eed)?;
        Ok(pairs[1].value)
    }
}

/// Evaluate the closed-walk certificate: requires `g` connected and
/// `2k < ceil(diam / r)`, computes `lambda_2` of the powered graph
/// (dense-exact up to 2000 vertices, Lanczos at tolerance 1e-10 beyond)
/// and the exact `t_2k`, and asserts
/// `lambda_2^(2k) >= t_2k * (1 - 1e-8)`.
pub fn check_lambda_inequality(g: &Graph, r: usize, k: usize) -> Result<AbReport> {
    if r == 0 || k == 0 {
        return Err(Error::InvalidParams("need r >= 1 and k >= 1".into()));
    }
    let diam = match g.diameter() {
        Ok(d) => d,
        Err(Error::Disconnected) => {
            return Err(Error::PreconditionViolated("graph must be connected".into()))
        }
        Err(e) => return Err(e),
    };
    let bound = diam.value.div_ceil(r);
    if 2 * k >= bound {
        return Err(Error::PreconditionViolated(format!(
            "need 2k < ceil(diam/r) = {bound}, got 2k = {}",
            2 * k
        )));
    }
    let powered = operators::graph_power(g, r)?;
    let lambda2 = lambda2_of_powered(&powered)?;
    let walks = t2k(g, r, k)?;
    let delta = delta_profile(g, r)?;
    let dhat = dhat_from_profile(&delta);
    let lower_bound = (r as f64 + 1.0) * dhat.powf(r as f64 / 2.0);
    let lhs = lambda2.abs().powi(2 * k as i32);
    let rhs = walks.to_f64().unwrap_or(f64::INFINITY);
    let inequality_holds = lhs >= rhs * (1.0 - 1e-8);
    Ok(AbReport {
        r,
        delta,
        dhat,
        lower_bound,
        lambda2,
        k_used: k,
        t2k: walks.to_string(),
        inequality_holds,
    })
}

const GIRTH_VERTEX_LIMIT: usize = 10_000;

/// Exact girth by BFS from every vertex; `None` for forests.
pub fn girth(g: &Graph) -> Result<Option<usize>> {
    if g.n() > GIRTH_VERTEX_LIMIT {
        return Err(Error::TooLarge(format!(
            "girth scan capped at {GIRTH_VERTEX_LIMIT} vertices, got {}",
            g.n()
        )));
    }
    let n = g.n();
    let mut best: Option<usize> = None;
    let mut dist = vec![u32::MAX; n];
    let mut parent = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    for root in 0..n as u32 {
        dist.fill(u32::MAX);
        parent.fill(u32::MAX);
        dist[root as usize] = 0;
        queue.clear();
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            for &u in g.neighbors(v as usize) {
                if dist[u as usize] == u32::MAX {
                    dist[u as usize] = dist[v as usize] + 1;
                    parent[u as usize] = v;
                    queue.push_back(u);
                } else if parent[v as usize] != u && parent[u as usize] != v {
                    // A non-tree edge closes a walk through the root whose
                    // union contains a cycle of at most this length.
                    let len = (dist[u as usize] + dist[v as usize] + 1) as usize;
                    if best.map_or(true, |b| len < b) {
                        best = Some(len);
                    }
                }
            }
        }
    }
    Ok(best)
}

fn regular_degree(g: &Graph) -> Result<usize> {
    if g.n() == 0 {
        return Err(Error::EmptyGraph);
    }
    let d = g.degree(0);
    for v in 1..g.n() {
        if g.degree(v) != d {
            return Err(Error::NotRegular(d, g.degree(v)));
        }
    }
    Ok(d)
}

/// Evaluate `A^(r) = A A^(r-1) - (d-1) A^(r-2)` (base cases `I` and
/// `A + I`) in exact integer sparse arithmetic. Valid on d-regular graphs
/// with girth above `2r`, where it reproduces the powered adjacency plus
/// the identity.
pub fn regular_power_recursion(g: &Graph, r: usize) -> Result<SparseSymMatrix<i64>> {
    let d = regular_degree(g)?;
    if let Some(girth) = girth(g)? {
        if girth <= 2 * r {
            return Err(Error::GirthTooSmall { girth, needed: 2 * r });
        }
    }
    let n = g.n();
    let identity = || -> Vec<std::collections::HashMap<u32, i64>> {
        (0..n).map(|i| std::collections::HashMap::from([(i as u32, 1i64)])).collect()
    };
    let mut prev2 = identity(); // A^(0)
    let mut prev1 = identity(); // A^(1) = A + I
    for (v, row) in prev1.iter_mut().enumerate() {
        for &u in g.neighbors(v) {
            row.insert(u, 1);
        }
    }
    if r == 0 {
        return Ok(rows_to_matrix(n, &prev2));
    }
    if r == 1 {
        return Ok(rows_to_matrix(n, &prev1));
    }
    for _ in 2..=r {
        let mut next: Vec<std::collections::HashMap<u32, i64>> =
            vec![std::collections::HashMap::new(); n];
        for (i, slot) in next.iter_mut().enumerate() {
            // (A * M)_ij = sum over neighbors u of i of M_uj.
            for &u in g.neighbors(i) {
                for (&j, &val) in &prev1[u as usize] {
                    *slot.entry(j).or_insert(0) += val;
                }
            }
            for (&j, &val) in &prev2[i] {
                *slot.entry(j).or_insert(0) -= (d as i64 - 1) * val;
            }
            slot.retain(|_, v| *v != 0);
        }
        prev2 = prev1;
        prev1 = next;
    }
    Ok(rows_to_matrix(n, &prev1))
}

fn rows_to_matrix(
    n: usize,
    rows: &[std::collections::HashMap<u32, i64>],
) -> SparseSymMatrix<i64> {
    let mut triples = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for (&j, &v) in row {
            if j as usize <= i {
                triples.push((i as u32, j, v));
            }
        }
    }
    SparseSymMatrix::new(n, triples)
}

/// Result of the even-composition multinomial check.
#[derive(Debug, Clone)]
pub struct EvenPartitionCheck {
    pub lhs: BigRational,
    pub rhs: BigRational,
    pub holds: bool,
}

fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
    }
    Some(acc)
}

/// Exact-rational evaluation of the even-composition inequality:
/// `sum over even (2m_1..2m_k) of multinomial(2n; ...) * prod x_i^(2m_i)
/// >= (sum x_i)^(2n) / 2^(k-1)`.
pub fn even_partition_check(x: &[f64], n2: usize) -> Result<EvenPartitionCheck> {
    if n2 % 2 != 0 {
        return Err(Error::InvalidParams(format!("2n must be even, got {n2}")));
    }
    if x.is_empty() {
        return Err(Error::InvalidParams("need at least one coordinate".into()));
    }
    if x.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParams("coordinates must be nonnegative and finite".into()));
    }
    let k = x.len();
    let n = n2 / 2;
    let compositions =
        binomial_u128((n + k - 1) as u64, (k - 1) as u64).unwrap_or(u128::MAX);
    if compositions > 200_000 {
        return Err(Error::TooLarge(format!(
            "{compositions} even compositions exceed the 2e5 guard"
        )));
    }

    let xr: Vec<BigRational> = x
        .iter()
        .map(|&v| BigRational::from_float(v).expect("finite input"))
        .collect();
    // Factorials up to 2n.
    let mut fact: Vec<BigUint> = Vec::with_capacity(n2 + 1);
    fact.push(BigUint::one());
    for i in 1..=n2 {
        let next = &fact[i - 1] * BigUint::from(i);
        fact.push(next);
    }
    let to_rat = |b: &BigUint| BigRational::from_integer(b.clone().into());

    let mut lhs = BigRational::zero();
    // Recursive enumeration of (m_1..m_k) with sum n.
    let mut m = vec![0usize; k];
    fn recurse(
        idx: usize,
        remaining: usize,
        m: &mut Vec<usize>,
        xr: &[BigRational],
        fact: &[BigUint],
        n2: usize,
        lhs: &mut BigRational,
        to_rat: &dyn Fn(&BigUint) -> BigRational,
    ) {
        if idx + 1 == m.len() {
            m[idx] = remaining;
            let mut term = to_rat(&fact[n2]);
            for (mi, xi) in m.iter().zip(xr) {
                term /= to_rat(&fact[2 * mi]);
                if *mi > 0 {
                    term *= xi.pow(2 * *mi as i32);
                }
            }
            *lhs += term;
            return;
        }
        for take in 0..=remaining {
            m[idx] = take;
            recurse(idx + 1, remaining - take, m, xr, fact, n2, lhs, to_rat);
        }
    }
    recurse(0, n, &mut m, &xr, &fact, n2, &mut lhs, &to_rat);

    let sum: BigRational = xr.iter().cloned().sum();
    let rhs = sum.pow(n2 as i32)
        / BigRational::from_integer(BigUint::from(2u32).pow(k as u32 - 1).into());
    let holds = lhs >= rhs;
    Ok(EvenPartitionCheck { lhs, rhs, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn path(n: usize) -> Graph {
        Graph::build(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>()).unwrap()
    }

    fn cycle(n: usize) -> Graph {
        Graph::build(n, &(0..n).map(|i| (i, (i + 1) % n)).collect::<Vec<_>>()).unwrap()
    }

    fn complete(n: usize) -> Graph {
        let mut e = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                e.push((u, v));
            }
        }
        Graph::build(n, &e).unwrap()
    }

    fn petersen() -> Graph {
        let outer = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)];
        let spokes = [(0, 5), (1, 6), (2, 7), (3, 8), (4, 9)];
        let inner = [(5, 7), (7, 9), (9, 6), (6, 8), (8, 5)];
        let edges: Vec<(usize, usize)> =
            outer.iter().chain(&spokes).chain(&inner).copied().collect();
        Graph::build(10, &edges).unwrap()
    }

    #[test]
    fn delta_zero_is_always_one() {
        for g in [path(5), cycle(7), complete(6), petersen()] {
            assert_eq!(delta_i(&g, 0).unwrap(), 1);
        }
    }

    #[test]
    fn delta_on_cycles_is_one() {
        let g = cycle(12);
        for i in 1..6 {
            assert_eq!(delta_i(&g, i).unwrap(), 1, "i = {i}");
        }
    }

    #[test]
    fn delta_one_on_complete_graph() {
        assert_eq!(delta_i(&complete(9), 1).unwrap(), 7);
    }

    #[test]
    fn delta_profile_on_petersen_telescopes() {
        assert_eq!(delta_profile(&petersen(), 2).unwrap(), vec![1, 2, 4]);
    }

    #[test]
    fn delta_requires_edges() {
        let g = Graph::build(3, &[]).unwrap();
        assert!(matches!(delta_i(&g, 1), Err(Error::NoEdges)));
    }

    #[test]
    fn delta_bounded_by_branching() {
        let mut rng = rng::stream(3, "delta-bound");
        for trial in 0..6u64 {
            let n = 30;
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.random::<f64>() < 0.12 {
                        edges.push((u, v));
                    }
                }
            }
            let g = Graph::build(n, &edges).unwrap();
            if g.m() == 0 {
                continue;
            }
            let max_deg = g.max_degree() as u64;
            let profile = delta_profile(&g, 4).unwrap();
            for (i, &d) in profile.iter().enumerate().skip(1) {
                assert!(
                    d <= (max_deg - 1).max(1).pow(i as u32),
                    "trial {trial} i {i}: {d}"
                );
            }
        }
    }

    #[test]
    fn dhat_exact_values() {
        assert_eq!(dhat_r(&petersen(), 2).unwrap(), 2.0);
        assert_eq!(dhat_r(&cycle(20), 3).unwrap(), 1.0);
        // 3-regular girth-6 Heawood graph at r = 2: dhat = d - 1 = 2.
        assert_eq!(dhat_r(&heawood(), 2).unwrap(), 2.0);
    }

    pub(crate) fn heawood() -> Graph {
        // Bipartite incidence graph of the Fano plane: vertices 0..13,
        // edges by the standard circulant construction.
        let mut edges = Vec::new();
        for i in 0..14 {
            edges.push((i, (i + 1) % 14));
        }
        for i in (1..14).step_by(2) {
            edges.push((i, (i + 5) % 14));
        }
        let mut canon: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        canon.sort_unstable();
        canon.dedup();
        Graph::build(14, &canon).unwrap()
    }

    #[test]
    fn heawood_is_cubic_with_girth_six() {
        let g = heawood();
        assert!((0..14).all(|v| g.degree(v) == 3));
        assert_eq!(girth(&g).unwrap(), Some(6));
    }

    #[test]
    fn ab_lower_bound_values() {
        assert_eq!(ab_lower_bound(&cycle(20), 3).unwrap(), 4.0);
        assert_eq!(ab_lower_bound(&petersen(), 2).unwrap(), 6.0);
    }

    #[test]
    fn t2k_trivial_values() {
        assert_eq!(t2k(&complete(3), 1, 1).unwrap(), BigUint::from(2u32));
        assert_eq!(t2k(&path(5), 1, 1).unwrap(), BigUint::from(1u32));
    }

    /// Dense exact-integer power oracle for closed walks.
    fn t2k_dense_oracle(g: &Graph, r: usize, k: usize) -> BigUint {
        let powered = operators::graph_power(g, r).unwrap();
        let n = powered.n();
        let mut a = vec![vec![BigUint::zero(); n]; n];
        for &(u, v) in powered.edges() {
            a[u as usize][v as usize] = BigUint::one();
            a[v as usize][u as usize] = BigUint::one();
        }
        let mut acc = a.clone();
        for _ in 1..2 * k {
            let mut next = vec![vec![BigUint::zero(); n]; n];
            for i in 0..n {
                for l in 0..n {
                    if !acc[i][l].is_zero() {
                        for j in 0..n {
                            if !a[l][j].is_zero() {
                                let add = &acc[i][l] * &a[l][j];
                                next[i][j] += add;
                            }
                        }
                    }
                }
            }
            acc = next;
        }
        (0..n).map(|v| acc[v][v].clone()).min().unwrap()
    }

    #[test]
    fn t2k_matches_dense_integer_oracle() {
        let g = path(9);
        assert_eq!(t2k(&g, 2, 2).unwrap(), t2k_dense_oracle(&g, 2, 2));
        let g = cycle(14);
        assert_eq!(t2k(&g, 2, 2).unwrap(), t2k_dense_oracle(&g, 2, 2));
        assert_eq!(t2k(&g, 3, 2).unwrap(), t2k_dense_oracle(&g, 3, 2));
    }

    #[test]
    fn lambda_inequality_on_paths_and_cycles() {
        let report = check_lambda_inequality(&path(20), 2, 2).unwrap();
        assert!(report.inequality_holds, "{report:?}");
        let report = check_lambda_inequality(&cycle(30), 3, 2).unwrap();
        assert!(report.inequality_holds, "{report:?}");
        assert!(report.lambda2 > 0.0);
    }

    #[test]
    fn lambda_inequality_precondition_guard() {
        // Petersen has diameter 2: no k satisfies 2k < ceil(2/r).
        assert!(matches!(
            check_lambda_inequality(&petersen(), 2, 1),
            Err(Error::PreconditionViolated(_))
        ));
        assert!(matches!(
            check_lambda_inequality(&path(20), 2, 5),
            Err(Error::PreconditionViolated(_))
        ));
        let disconnected = Graph::build(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(matches!(
            check_lambda_inequality(&disconnected, 1, 1),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn lambda_inequality_on_sparse_random_giants() {
        for seed in 0..5 {
            let lg = crate::generators::gen_er(120, 3.0, 900 + seed).unwrap();
            let giant = lg.largest_component().unwrap().graph;
            match check_lambda_inequality(&giant, 2, 2) {
                Ok(report) => assert!(report.inequality_holds, "seed {seed}: {report:?}"),
                Err(Error::PreconditionViolated(_)) => {}
                Err(e) => panic!("seed {seed}: {e}"),
            }
        }
    }

    #[test]
    fn girth_values() {
        assert_eq!(girth(&cycle(5)).unwrap(), Some(5));
        assert_eq!(girth(&petersen()).unwrap(), Some(5));
        assert_eq!(girth(&complete(4)).unwrap(), Some(3));
        assert_eq!(girth(&path(6)).unwrap(), None);
    }

    #[test]
    fn recursion_base_case_is_adjacency_plus_identity() {
        let g = cycle(8);
        let m = regular_power_recursion(&g, 1).unwrap();
        for i in 0..8u32 {
            assert_eq!(m.entry(i, i), Some(1));
            assert_eq!(m.entry(i, (i + 1) % 8), Some(1));
        }
        assert_eq!(m.nnz_lower(), 16);
    }

    fn assert_recursion_matches_powering(g: &Graph, r: usize) {
        let rec = regular_power_recursion(g, r).unwrap();
        let powered = operators::graph_power(g, r).unwrap();
        let mut expected: Vec<(u32, u32, i64)> =
            powered.edges().iter().map(|&(u, v)| (v, u, 1i64)).collect();
        expected.extend((0..g.n() as u32).map(|i| (i, i, 1i64)));
        let expected = SparseSymMatrix::new(g.n(), expected);
        assert_eq!(rec.triples(), expected.triples());
    }

    #[test]
    fn recursion_equals_bfs_powering_plus_identity() {
        assert_recursion_matches_powering(&petersen(), 2);
        assert_recursion_matches_powering(&heawood(), 2);
        assert_recursion_matches_powering(&cycle(16), 3);
        // A random 3-regular graph filtered to girth above 2r.
        for seed in 0..20 {
            let g = crate::generators::gen_random_regular(40, 3, seed).unwrap();
            if girth(&g).unwrap().is_some_and(|girth| girth > 4) {
                assert_recursion_matches_powering(&g, 2);
            }
        }
    }

    #[test]
    fn recursion_guards() {
        assert!(matches!(
            regular_power_recursion(&complete(4), 2),
            Err(Error::GirthTooSmall { girth: 3, needed: 4 })
        ));
        assert!(matches!(
            regular_power_recursion(&path(4), 1),
            Err(Error::NotRegular(1, 2))
        ));
    }

    #[test]
    fn even_partition_single_coordinate_is_equality() {
        let out = even_partition_check(&[1.75], 6).unwrap();
        assert_eq!(out.lhs, out.rhs);
        assert!(out.holds);
    }

    #[test]
    fn even_partition_hand_case_is_equality() {
        let out = even_partition_check(&[1.0, 1.0], 2).unwrap();
        assert_eq!(out.lhs, BigRational::from_integer(2.into()));
        assert_eq!(out.rhs, BigRational::from_integer(2.into()));
        assert!(out.holds);
    }

    #[test]
    fn even_partition_holds_on_samples() {
        let mut rng = rng::stream(8, "even-partition");
        for trial in 0..1000 {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 5.0).collect();
            let n2 = 2 * (1 + (trial % 4));
            let out = even_partition_check(&x, n2).unwrap();
            assert!(out.holds, "trial {trial}: x = {x:?}, 2n = {n2}");
        }
    }

    #[test]
    fn even_partition_guards() {
        assert!(even_partition_check(&[1.0], 3).is_err());
        assert!(even_partition_check(&[-1.0], 2).is_err());
        assert!(matches!(
            even_partition_check(&vec![1.0; 40], 40),
            Err(Error::TooLarge(_))
        ));
    }
}
