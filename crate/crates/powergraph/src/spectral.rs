//! Iterative eigensolvers, eigenvector rounding, the agreement score, and
//! the unified clustering dispatcher.
//!
//! The symmetric path is thick-restart Lanczos with full
//! reorthogonalization; the general path is power iteration with
//! Schur-style deflation (orthogonal projection against the invariant
//! subspace found so far) and an Arnoldi fallback that detects complex
//! pairs. Operators that expose a diagonal symmetrizer (the random walk
//! matrix) are routed through the symmetric solver by conjugation.
//!
//! "Second largest" follows algebraic order for symmetric vertex-space
//! operators and magnitude order for the nonbacktracking family; both
//! conventions are pinned by tests.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::operators::{self, ClassicalKind, DirectedEdgeSpace, LinearOp, Negated};
use crate::pipeline::{self, PsiParams};
use crate::rng;

/// Converged (or flagged) eigenpair.
///
/// For real eigenvalues `value` is the eigenvalue and `magnitude` its
/// absolute value. When the solver detects a complex conjugate pair it
/// reports the real part in `value`, the modulus in `magnitude`, sets
/// `complex_pair`, and returns the last real iterate as `vector`; such
/// pairs are exempt from the residual contract.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub magnitude: f64,
    pub complex_pair: bool,
    pub vector: Vec<f64>,
    pub residual: f64,
}

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 5000;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn random_unit(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        let n = norm(&v);
        if n > 1e-9 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn symmetry_probe(op: &dyn LinearOp, seed: u64) -> Result<()> {
    let mut rng = rng::stream(seed, "symmetry-probe");
    let x = random_unit(op.dim(), &mut rng);
    let y = random_unit(op.dim(), &mut rng);
    let mx = op.apply_vec(&x);
    let my = op.apply_vec(&y);
    let dev = (dot(&mx, &y) - dot(&x, &my)).abs();
    if dev > 1e-8 {
        return Err(Error::NotSymmetric(dev));
    }
    Ok(())
}

fn sorted_sym_eig(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let m = h.nrows();
    let sym = (h + h.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(m, m);
    for (new, &old) in order.iter().enumerate() {
        vectors.set_column(new, &eig.eigenvectors.column(old));
    }
    (values, vectors)
}

/// Top-k eigenpairs of a symmetric operator, descending by algebraic
/// value. Thick-restart Lanczos with full reorthogonalization from a
/// seeded random start; deterministic given the seed.
pub fn top_eigs_symmetric(
    op: &dyn LinearOp,
    k: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<Vec<EigenPair>> {
    let dim = op.dim();
    if k == 0 || k > dim {
        return Err(Error::InvalidParams(format!("need 1 <= k <= dim, got k = {k}, dim = {dim}")));
    }
    symmetry_probe(op, seed)?;
    let mut rng = rng::stream(seed, "lanczos");

    let max_basis = dim.min((3 * k + 20).max(80));
    let keep = (k + 8).min(max_basis.saturating_sub(4)).max(k);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
    let mut h = DMatrix::<f64>::zeros(max_basis, max_basis);
    let mut applies = 0usize;

    basis.push(random_unit(dim, &mut rng));
    let mut filled = 0usize; // columns of h already populated

    loop {
        let mut resid_vec: Option<Vec<f64>> = None;
        let mut resid_norm = 0.0;
        // Expand until the basis is full or the wanted pairs converge.
        while filled < max_basis {
            let j = filled;
            if applies >= max_iter {
                return Err(Error::MaxIterations(max_iter));
            }
            let mut w = op.apply_vec(&basis[j]);
            applies += 1;
            // Full reorthogonalization, two passes.
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(&w, v);
                    if c != 0.0 {
                        for (wi, vi) in w.iter_mut().zip(v) {
                            *wi -= c * vi;
                        }
                        h[(i, j)] += c;
                        if i != j {
                            h[(j, i)] = h[(i, j)];
                        }
                    }
                }
            }
            filled += 1;
            let beta = norm(&w);

            let m = filled;
            let hm = h.view((0, 0), (m, m)).into_owned();
            let (theta, s) = sorted_sym_eig(&hm);
            let enough = m >= k;
            let est_ok = enough
                && (0..k).all(|i| {
                    let est = beta * s[(m - 1, i)].abs();
                    est <= tol * theta[i].abs().max(1.0)
                });
            let exhausted = m == dim;
            if est_ok || exhausted {
                // Assemble Ritz vectors and verify true residuals.
                let mut pairs = Vec::with_capacity(k);
                let mut ok = true;
                for i in 0..k {
                    let mut x = vec![0.0; dim];
                    for (bi, v) in basis.iter().enumerate() {
                        let c = s[(bi, i)];
                        for (xi, vi) in x.iter_mut().zip(v) {
                            *xi += c * vi;
                        }
                    }
                    let nx = norm(&x);
                    for xi in x.iter_mut() {
                        *xi /= nx;
                    }
                    let mx = op.apply_vec(&x);
                    applies += 1;
                    let res: f64 = mx
                        .iter()
                        .zip(&x)
                        .map(|(a, b)| (a - theta[i] * b).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    if res > tol * theta[i].abs().max(1.0) && !exhausted {
                        ok = false;
                        break;
                    }
                    pairs.push(EigenPair {
                        value: theta[i],
                        magnitude: theta[i].abs(),
                        complex_pair: false,
                        vector: x,
                        residual: res,
                    });
                }
                if ok {
                    return Ok(pairs);
                }
            }

            if beta <= 1e-13 {
                // Invariant subspace found; continue in a fresh direction.
                let mut fresh = random_unit(dim, &mut rng);
                for _ in 0..2 {
                    for v in &basis {
                        let c = dot(&fresh, v);
                        for (fi, vi) in fresh.iter_mut().zip(v) {
                            *fi -= c * vi;
                        }
                    }
                }
                let nf = norm(&fresh);
                if nf < 1e-9 || filled >= dim {
                    return Err(Error::MaxIterations(applies));
                }
                for fi in fresh.iter_mut() {
                    *fi /= nf;
                }
                if filled < max_basis {
                    basis.push(fresh);
                }
                continue;
            }
            if filled < max_basis {
                for wi in w.iter_mut() {
                    *wi /= beta;
                }
                basis.push(w);
            } else {
                resid_vec = Some(w);
                resid_norm = beta;
            }
        }

        // Thick restart: keep the leading Ritz vectors (and the trailing
        // two, which helps when the spectrum straddles zero) plus the
        // residual direction.
        let m = filled;
        let hm = h.view((0, 0), (m, m)).into_owned();
        let (theta, s) = sorted_sym_eig(&hm);
        let mut chosen: Vec<usize> = (0..keep.min(m)).collect();
        for tail in [m.saturating_sub(1), m.saturating_sub(2)] {
            if !chosen.contains(&tail) {
                chosen.push(tail);
            }
        }
        let mut new_basis: Vec<Vec<f64>> = Vec::with_capacity(chosen.len() + 1);
        for &ci in &chosen {
            let mut y = vec![0.0; dim];
            for (bi, v) in basis.iter().enumerate() {
                let c = s[(bi, ci)];
                for (yi, vi) in y.iter_mut().zip(v) {
                    *yi += c * vi;
                }
            }
            let ny = norm(&y);
            for yi in y.iter_mut() {
                *yi /= ny;
            }
            new_basis.push(y);
        }
        h.fill(0.0);
        for (idx, &ci) in chosen.iter().enumerate() {
            h[(idx, idx)] = theta[ci];
        }
        filled = chosen.len();
        basis = new_basis;
        match resid_vec {
            Some(mut f) if resid_norm > 1e-13 => {
                for fi in f.iter_mut() {
                    *fi /= resid_norm;
                }
                basis.push(f);
            }
            _ => {
                let mut fresh = random_unit(dim, &mut rng);
                for v in &basis {
                    let c = dot(&fresh, v);
                    for (fi, vi) in fresh.iter_mut().zip(v) {
                        *fi -= c * vi;
                    }
                }
                let nf = norm(&fresh);
                if nf < 1e-9 {
                    return Err(Error::MaxIterations(applies));
                }
                for fi in fresh.iter_mut() {
                    *fi /= nf;
                }
                basis.push(fresh);
            }
        }
    }
}

struct Conjugated<'a> {
    inner: &'a dyn LinearOp,
    scale: Vec<f64>,
    inv_scale: Vec<f64>,
}

impl LinearOp for Conjugated<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let t: Vec<f64> = x.iter().zip(&self.inv_scale).map(|(xi, s)| xi * s).collect();
        self.inner.apply(&t, y);
        for (yi, s) in y.iter_mut().zip(&self.scale) {
            *yi *= s;
        }
    }
    fn symmetrizer(&self) -> Option<Vec<f64>> {
        Some(vec![1.0; self.dim()])
    }
}

fn project_out(x: &mut [f64], q: &[Vec<f64>]) {
    for v in q {
        let c = dot(x, v);
        if c != 0.0 {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi -= c * vi;
            }
        }
    }
}

/// Arnoldi factorization of the deflated operator, used as a fallback to
/// classify stalls (complex pair vs. slow real convergence).
fn arnoldi_ritz(
    op: &dyn LinearOp,
    q: &[Vec<f64>],
    start: &[f64],
    steps: usize,
) -> (Vec<Vec<f64>>, DMatrix<f64>) {
    let dim = op.dim();
    let m = steps.min(dim.saturating_sub(q.len())).max(1);
    let mut w_basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut v0 = start.to_vec();
    project_out(&mut v0, q);
    let n0 = norm(&v0);
    if n0 < 1e-12 {
        return (w_basis, h);
    }
    for vi in v0.iter_mut() {
        *vi /= n0;
    }
    w_basis.push(v0);
    for j in 0..m {
        let mut w = op.apply_vec(&w_basis[j]);
        project_out(&mut w, q);
        for _ in 0..2 {
            for (i, v) in w_basis.iter().enumerate() {
                let c = dot(&w, v);
                if c != 0.0 {
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= c * vi;
                    }
                    h[(i, j)] += c;
                }
            }
        }
        let beta = norm(&w);
        if j + 1 < m {
            if beta <= 1e-13 {
                let used = j + 1;
                let hm = h.view((0, 0), (used, used)).into_owned();
                w_basis.truncate(used);
                return (w_basis, hm);
            }
            h[(j + 1, j)] = beta;
            for wi in w.iter_mut() {
                *wi /= beta;
            }
            w_basis.push(w);
        }
    }
    (w_basis, h)
}

/// Eigenvector of the small projected matrix for real eigenvalue `theta`,
/// by shifted inverse iteration.
fn small_eigvec(h: &DMatrix<f64>, theta: f64, seed: u64) -> Option<DVector<f64>> {
    let m = h.nrows();
    let shift = theta + 1e-10 * theta.abs().max(1.0);
    let shifted = h.clone() - DMatrix::identity(m, m) * shift;
    let lu = nalgebra::LU::new(shifted);
    let mut rng = rng::stream(seed, "small-eigvec");
    let mut v = DVector::from_fn(m, |_, _| rng.random::<f64>() - 0.5);
    v /= v.norm();
    for _ in 0..50 {
        let next = lu.solve(&v)?;
        let n = next.norm();
        if !n.is_finite() || n == 0.0 {
            return None;
        }
        v = next / n;
    }
    Some(v)
}

/// Top-k eigenpairs of a general operator, descending by magnitude.
///
/// Operators with a known symmetrizer are conjugated into the symmetric
/// solver (eigenvectors mapped back). Otherwise: power iteration, with
/// each converged eigenvector appended to an orthonormal deflation basis.
/// Stalls fall back to a small Arnoldi factorization; a leading complex
/// pair is reported with `complex_pair` set rather than iterated forever.
pub fn top_eigs_general(
    op: &dyn LinearOp,
    k: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<Vec<EigenPair>> {
    let dim = op.dim();
    if k == 0 || k > dim {
        return Err(Error::InvalidParams(format!("need 1 <= k <= dim, got k = {k}, dim = {dim}")));
    }
    if let Some(scale) = op.symmetrizer() {
        if scale.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParams("symmetrizer must be positive".into()));
        }
        let inv_scale: Vec<f64> = scale.iter().map(|s| 1.0 / s).collect();
        let conj = Conjugated { inner: op, scale: scale.clone(), inv_scale: inv_scale.clone() };
        let mut pairs = top_eigs_symmetric(&conj, k, tol, max_iter, seed)?;
        for p in pairs.iter_mut() {
            for (vi, s) in p.vector.iter_mut().zip(&inv_scale) {
                *vi *= s;
            }
            let n = norm(&p.vector);
            for vi in p.vector.iter_mut() {
                *vi /= n;
            }
            let mx = op.apply_vec(&p.vector);
            p.residual = mx
                .iter()
                .zip(&p.vector)
                .map(|(a, b)| (a - p.value * b).powi(2))
                .sum::<f64>()
                .sqrt();
        }
        return Ok(pairs);
    }

    let mut rng = rng::stream(seed, "power-iteration");
    let mut deflation: Vec<Vec<f64>> = Vec::new();
    let mut pairs: Vec<EigenPair> = Vec::new();

    for _ in 0..k {
        let mut x = random_unit(dim, &mut rng);
        project_out(&mut x, &deflation);
        let nx = norm(&x);
        if nx < 1e-12 {
            return Err(Error::EigenFailure("deflation basis exhausted the space".into()));
        }
        for xi in x.iter_mut() {
            *xi /= nx;
        }

        let mut converged: Option<EigenPair> = None;
        let mut last_res = f64::INFINITY;
        for _ in 0..max_iter {
            let mut y = op.apply_vec(&x);
            project_out(&mut y, &deflation);
            let lambda = dot(&x, &y);
            let res: f64 =
                y.iter().zip(&x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
            last_res = res;
            if res <= tol * lambda.abs().max(1.0) {
                converged = Some(EigenPair {
                    value: lambda,
                    magnitude: lambda.abs(),
                    complex_pair: false,
                    vector: x.clone(),
                    residual: res,
                });
                break;
            }
            let ny = norm(&y);
            if ny < 1e-300 {
                // The deflated operator annihilates this direction.
                converged = Some(EigenPair {
                    value: 0.0,
                    magnitude: 0.0,
                    complex_pair: false,
                    vector: x.clone(),
                    residual: ny,
                });
                break;
            }
            for (xi, yi) in x.iter_mut().zip(&y) {
                *xi = yi / ny;
            }
        }

        let pair = match converged {
            Some(p) => p,
            None => {
                let (w_basis, h) = arnoldi_ritz(op, &deflation, &x, 40);
                if h.nrows() == 0 {
                    return Err(Error::MaxIterations(max_iter));
                }
                let eigs = h.clone().complex_eigenvalues();
                let mut idx: Vec<usize> = (0..eigs.len()).collect();
                idx.sort_by(|&a, &b| eigs[b].norm().partial_cmp(&eigs[a].norm()).unwrap());
                let lead = eigs[idx[0]];
                if lead.im.abs() > tol * lead.norm().max(1e-300) {
                    EigenPair {
                        value: lead.re,
                        magnitude: lead.norm(),
                        complex_pair: true,
                        vector: x.clone(),
                        residual: last_res,
                    }
                } else {
                    let s =
                        small_eigvec(&h, lead.re, seed).ok_or(Error::MaxIterations(max_iter))?;
                    let mut xr = vec![0.0; dim];
                    for (bi, v) in w_basis.iter().enumerate() {
                        let c = s[bi];
                        for (xi, vi) in xr.iter_mut().zip(v) {
                            *xi += c * vi;
                        }
                    }
                    let nxr = norm(&xr);
                    if nxr < 1e-12 {
                        return Err(Error::MaxIterations(max_iter));
                    }
                    for xi in xr.iter_mut() {
                        *xi /= nxr;
                    }
                    let mut y = op.apply_vec(&xr);
                    project_out(&mut y, &deflation);
                    let lambda = dot(&xr, &y);
                    let res: f64 = y
                        .iter()
                        .zip(&xr)
                        .map(|(a, b)| (a - lambda * b).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    if res > tol * lambda.abs().max(1.0) * 100.0 {
                        return Err(Error::MaxIterations(max_iter));
                    }
                    EigenPair {
                        value: lambda,
                        magnitude: lambda.abs(),
                        complex_pair: false,
                        vector: xr,
                        residual: res,
                    }
                }
            }
        };

        // Deflate. For a complex pair, remove the full two-dimensional
        // invariant plane spanned by the iterate and its image.
        let mut q1 = pair.vector.clone();
        project_out(&mut q1, &deflation);
        let n1 = norm(&q1);
        if n1 > 1e-12 {
            for v in q1.iter_mut() {
                *v /= n1;
            }
            if pair.complex_pair {
                let mut q2 = op.apply_vec(&q1);
                project_out(&mut q2, &deflation);
                let c = dot(&q2, &q1);
                for (a, b) in q2.iter_mut().zip(&q1) {
                    *a -= c * b;
                }
                let n2 = norm(&q2);
                deflation.push(q1);
                if n2 > 1e-12 {
                    for v in q2.iter_mut() {
                        *v /= n2;
                    }
                    deflation.push(q2);
                }
            } else {
                deflation.push(q1);
            }
        }
        pairs.push(pair);
    }

    pairs.sort_by(|a, b| b.magnitude.partial_cmp(&a.magnitude).unwrap());
    Ok(pairs)
}

/// Vertex partition into communities `1..=k`, flagged when the rounding
/// that produced it was degenerate (every vertex on one side).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<u32>,
    k: usize,
    degenerate: bool,
}

impl Partition {
    pub fn new(labels: Vec<u32>, k: usize) -> Result<Self> {
        if labels.iter().any(|&l| l == 0 || l as usize > k) {
            return Err(Error::InvalidParams(format!("labels must lie in 1..={k}")));
        }
        let degenerate = !labels.is_empty() && labels.iter().all(|&l| l == labels[0]);
        Ok(Partition { labels, k, degenerate })
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

/// Sign rounding: strictly positive entries to community 1, the rest
/// (including zeros) to community 2.
pub fn round_sign(vec: &[f64]) -> Partition {
    let labels = vec.iter().map(|&x| if x > 0.0 { 1 } else { 2 }).collect();
    Partition::new(labels, 2).expect("labels in range")
}

/// Median rounding: strictly above the median to community 1. For even
/// length the median is the lower of the two central order statistics.
pub fn round_median(vec: &[f64]) -> Partition {
    if vec.is_empty() {
        return Partition { labels: Vec::new(), k: 2, degenerate: true };
    }
    let mut sorted = vec.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[(sorted.len() - 1) / 2];
    let labels = vec.iter().map(|&x| if x > median { 1 } else { 2 }).collect();
    Partition::new(labels, 2).expect("labels in range")
}

/// Edge-sum rounding for edge-space eigenvectors: each vertex scores the
/// sum of entries over directed edges ending at it, then median rounding.
pub fn round_edge_sums(vec: &[f64], des: &DirectedEdgeSpace, n: usize) -> Result<Partition> {
    if vec.len() != des.count() {
        return Err(Error::DimensionMismatch { expected: des.count(), got: vec.len() });
    }
    let mut scores = vec![0.0f64; n];
    for (d, &x) in vec.iter().enumerate() {
        scores[des.head(d as u32) as usize] += x;
    }
    Ok(round_median(&scores))
}

/// Permutation-maximized balanced per-community accuracy:
/// `max over pi of (1/k) * sum_i |{v in Omega_i : pi(guess_v) = i}| /
/// |Omega_i|`. Exact scan over all k! permutations, k <= 8.
pub fn agreement(truth: &Partition, guess: &Partition) -> Result<f64> {
    if truth.n() != guess.n() {
        return Err(Error::DimensionMismatch { expected: truth.n(), got: guess.n() });
    }
    if truth.k() != guess.k() {
        return Err(Error::InvalidParams(format!(
            "partitions disagree on k: {} vs {}",
            truth.k(),
            guess.k()
        )));
    }
    let k = truth.k();
    if k > 8 {
        return Err(Error::KTooLarge(k));
    }
    let mut sizes = vec![0usize; k];
    let mut confusion = vec![vec![0usize; k]; k];
    for (&t, &g) in truth.labels().iter().zip(guess.labels()) {
        sizes[t as usize - 1] += 1;
        confusion[t as usize - 1][g as usize - 1] += 1;
    }
    for (i, &s) in sizes.iter().enumerate() {
        if s == 0 {
            return Err(Error::EmptyCommunity(i as u32 + 1));
        }
    }
    // Heap's algorithm; perm[g] = i reads guess community g+1 as i+1.
    let mut perm: Vec<usize> = (0..k).collect();
    let mut stack = vec![0usize; k];
    let score = |perm: &[usize]| -> f64 {
        let mut acc = 0.0;
        for (g, &i) in perm.iter().enumerate() {
            acc += confusion[i][g] as f64 / sizes[i] as f64;
        }
        acc / k as f64
    };
    let mut best = score(&perm);
    let mut i = 1;
    while i < k {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            best = best.max(score(&perm));
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    Ok(best)
}

/// How the powering order is chosen for methods that power the graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RChoice {
    Fixed(usize),
    /// `r = max(1, round(frac * diameter))` on the operand graph.
    FracDiam(f64),
}

impl RChoice {
    fn resolve(&self, g: &Graph) -> Result<usize> {
        match *self {
            RChoice::Fixed(r) => Ok(r),
            RChoice::FracDiam(frac) => {
                if !(frac > 0.0) {
                    return Err(Error::InvalidParams("diameter fraction must be positive".into()));
                }
                let diam = g.diameter()?.value as f64;
                Ok(((frac * diam).round() as usize).max(1))
            }
        }
    }
}

/// Clustering method for the unified dispatcher.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Adjacency,
    Laplacian,
    NormalizedLaplacian,
    RandomWalk,
    Nonbacktracking,
    PoweredAdjacency { r: RChoice },
    PoweredNonbacktracking { r: RChoice },
    DistanceMatrix { r: RChoice },
    Meta { params: PsiParams },
}

/// Output of [`spectral_cluster`]: the partition plus the eigenvalues and
/// residuals that produced it.
#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub partition: Partition,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r_used: Option<usize>,
    pub cleaning: Option<pipeline::CleaningReport>,
}

/// Complete a partial labeling: each unassigned vertex takes the majority
/// label among its already-assigned neighbors, ties and isolated vertices
/// falling to a seeded coin.
/// Public alias of the back-fill rule, for external harnesses that score
/// partial labelings the same way the dispatcher does.
pub fn backfill_for_probe(g: &Graph, assigned: &mut [Option<u32>], k: usize, seed: u64) {
    backfill_labels(g, assigned, k, seed)
}

pub(crate) fn backfill_labels(g: &Graph, assigned: &mut [Option<u32>], k: usize, seed: u64) {
    let mut coin = rng::stream(seed, "backfill");
    let snapshot: Vec<Option<u32>> = assigned.to_vec();
    for v in 0..g.n() {
        if assigned[v].is_some() {
            continue;
        }
        let mut counts = vec![0usize; k];
        for &u in g.neighbors(v) {
            if let Some(l) = snapshot[u as usize] {
                counts[l as usize - 1] += 1;
            }
        }
        let best = counts.iter().copied().max().unwrap_or(0);
        let label = if best == 0 {
            coin.random_range(1..=k as u32)
        } else {
            let tied: Vec<u32> = counts
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c == best)
                .map(|(i, _)| i as u32 + 1)
                .collect();
            if tied.len() == 1 {
                tied[0]
            } else {
                tied[coin.random_range(0..tied.len())]
            }
        };
        assigned[v] = Some(label);
    }
}

fn second_vector_symmetric(
    op: &dyn LinearOp,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let pairs = top_eigs_symmetric(op, 2, tol, max_iter, seed)?;
    let values = pairs.iter().map(|p| p.value).collect();
    let residuals = pairs.iter().map(|p| p.residual).collect();
    Ok((pairs[1].vector.clone(), values, residuals))
}

/// Unified spectral clustering over the whole graph: builds the requested
/// operator on the largest component, splits on the second-ranked
/// eigenvector (algebraic rank for vertex-space operators, magnitude rank
/// for the nonbacktracking family; Laplacian kinds rank from the bottom),
/// rounds (sign for vertex space, edge sums for edge space), and
/// back-fills vertices outside the giant by neighbor majority / seeded
/// coin.
pub fn spectral_cluster(
    g: &Arc<Graph>,
    method: &Method,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<ClusterResult> {
    if g.n() == 0 {
        return Err(Error::EmptyGraph);
    }
    if let Method::Meta { params } = method {
        let meta = pipeline::meta_cluster(g, params, seed)?;
        return Ok(ClusterResult {
            partition: meta.partition,
            eigenvalues: meta.eigenvalues,
            residuals: meta.residuals,
            r_used: Some(meta.r),
            cleaning: Some(meta.report),
        });
    }

    let giant = g.largest_component()?;
    let sub = Arc::new(giant.graph);
    let mut r_used = None;

    let (giant_partition, eigenvalues, residuals) = match method {
        Method::Adjacency => {
            let op = operators::classical_operator(&sub, ClassicalKind::Adjacency)?;
            let (v, vals, res) = second_vector_symmetric(&op, tol, max_iter, seed)?;
            (round_sign(&v), vals, res)
        }
        Method::Laplacian => {
            let op = Negated(operators::classical_operator(&sub, ClassicalKind::Laplacian)?);
            let (v, vals, res) = second_vector_symmetric(&op, tol, max_iter, seed)?;
            (round_sign(&v), vals.iter().map(|x| -x).collect(), res)
        }
        Method::NormalizedLaplacian => {
            let op =
                Negated(operators::classical_operator(&sub, ClassicalKind::NormalizedLaplacian)?);
            let (v, vals, res) = second_vector_symmetric(&op, tol, max_iter, seed)?;
            (round_sign(&v), vals.iter().map(|x| -x).collect(), res)
        }
        Method::RandomWalk => {
            let op = operators::classical_operator(&sub, ClassicalKind::RandomWalk)?;
            let pairs = top_eigs_general(&op, 2, tol, max_iter, seed)?;
            let vals = pairs.iter().map(|p| p.value).collect();
            let res = pairs.iter().map(|p| p.residual).collect();
            (round_sign(&pairs[1].vector), vals, res)
        }
        Method::PoweredAdjacency { r } => {
            let r = r.resolve(&sub)?;
            r_used = Some(r);
            let powered = Arc::new(operators::graph_power(&sub, r)?);
            let op = operators::classical_operator(&powered, ClassicalKind::Adjacency)?;
            let (v, vals, res) = second_vector_symmetric(&op, tol, max_iter, seed)?;
            (round_sign(&v), vals, res)
        }
        Method::DistanceMatrix { r } => {
            let r = r.resolve(&sub)?;
            r_used = Some(r);
            let op = operators::distance_matrix(&sub, r).to_csr();
            let (v, vals, res) = second_vector_symmetric(&op, tol, max_iter, seed)?;
            (round_sign(&v), vals, res)
        }
        Method::Nonbacktracking => {
            let op = operators::nonbacktracking(&sub)?;
            let pairs = top_eigs_general(&op, 2, tol, max_iter, seed)?;
            if pairs[1].complex_pair {
                return Err(Error::NonConvergentComplexPair);
            }
            let vals = pairs.iter().map(|p| p.value).collect();
            let res = pairs.iter().map(|p| p.residual).collect();
            let part = round_edge_sums(&pairs[1].vector, op.edge_space(), sub.n())?;
            (part, vals, res)
        }
        Method::PoweredNonbacktracking { r } => {
            let r = r.resolve(&sub)?;
            r_used = Some(r);
            let op = operators::powered_nonbacktracking(&sub, r)?;
            let pairs = top_eigs_general(&op, 2, tol, max_iter, seed)?;
            if pairs[1].complex_pair {
                return Err(Error::NonConvergentComplexPair);
            }
            let vals = pairs.iter().map(|p| p.value).collect();
            let res = pairs.iter().map(|p| p.residual).collect();
            let part = round_edge_sums(&pairs[1].vector, op.edge_space(), sub.n())?;
            (part, vals, res)
        }
        Method::Meta { .. } => unreachable!("handled above"),
    };

    let mut assigned: Vec<Option<u32>> = vec![None; g.n()];
    for (new, &old) in giant.new_to_old.iter().enumerate() {
        assigned[old as usize] = Some(giant_partition.labels()[new]);
    }
    backfill_labels(g, &mut assigned, 2, seed);
    let labels: Vec<u32> = assigned.into_iter().map(|l| l.unwrap()).collect();
    let mut partition = Partition::new(labels, 2)?;
    partition.degenerate = giant_partition.degenerate;

    Ok(ClusterResult { partition, eigenvalues, residuals, r_used, cleaning: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::operators::classical_operator;

    struct DenseOp {
        m: DMatrix<f64>,
    }

    impl LinearOp for DenseOp {
        fn dim(&self) -> usize {
            self.m.nrows()
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            let xv = DVector::from_column_slice(x);
            let r = &self.m * xv;
            y.copy_from_slice(r.as_slice());
        }
    }

    struct IdentityOp(usize);

    impl LinearOp for IdentityOp {
        fn dim(&self) -> usize {
            self.0
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            y.copy_from_slice(x);
        }
        fn symmetrizer(&self) -> Option<Vec<f64>> {
            Some(vec![1.0; self.0])
        }
    }

    fn cycle(n: usize) -> Arc<Graph> {
        Arc::new(Graph::build(n, &(0..n).map(|i| (i, (i + 1) % n)).collect::<Vec<_>>()).unwrap())
    }

    fn complete(n: usize) -> Arc<Graph> {
        let mut e = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                e.push((u, v));
            }
        }
        Arc::new(Graph::build(n, &e).unwrap())
    }

    #[test]
    fn c4_adjacency_spectrum_top_two() {
        let g = cycle(4);
        let op = classical_operator(&g, ClassicalKind::Adjacency).unwrap();
        let pairs = top_eigs_symmetric(&op, 4, 1e-10, 2000, 1).unwrap();
        let values: Vec<f64> = pairs.iter().map(|p| p.value).collect();
        let expected = [2.0, 0.0, 0.0, -2.0];
        for (got, want) in values.iter().zip(expected) {
            assert!((got - want).abs() < 1e-8, "{values:?}");
        }
    }

    #[test]
    fn complete_graph_spectrum() {
        let g = complete(7);
        let op = classical_operator(&g, ClassicalKind::Adjacency).unwrap();
        let pairs = top_eigs_symmetric(&op, 2, 1e-10, 2000, 3).unwrap();
        assert!((pairs[0].value - 6.0).abs() < 1e-8);
        assert!((pairs[1].value + 1.0).abs() < 1e-8);
    }

    #[test]
    fn identity_operator_all_ones_spectrum() {
        let pairs = top_eigs_symmetric(&IdentityOp(12), 3, 1e-10, 1000, 5).unwrap();
        for p in &pairs {
            assert!((p.value - 1.0).abs() < 1e-10);
            assert!(p.residual < 1e-10);
        }
        for i in 0..3 {
            for j in i + 1..3 {
                let d = dot(&pairs[i].vector, &pairs[j].vector).abs();
                assert!(d <= 1e-8);
            }
        }
    }

    #[test]
    fn symmetric_solver_rejects_nonsymmetric_operator() {
        let g = cycle(5);
        let b = operators::nonbacktracking(&g).unwrap();
        assert!(matches!(top_eigs_symmetric(&b, 1, 1e-8, 100, 1), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn lanczos_matches_dense_oracle_top_three() {
        let mut rng = rng::stream(31, "dense-oracle");
        for trial in 0..8usize {
            let n = 30 + (trial * 23) % 170;
            let mut m = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v: f64 = rng.random::<f64>() - 0.5;
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let eig = nalgebra::SymmetricEigen::new(m.clone());
            let mut want: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            want.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let op = DenseOp { m };
            let pairs = top_eigs_symmetric(&op, 3, 1e-9, 20_000, 7 + trial as u64).unwrap();
            for i in 0..3 {
                let rel = (pairs[i].value - want[i]).abs() / want[i].abs().max(1.0);
                assert!(rel < 1e-6, "trial {trial} rank {i}: {} vs {}", pairs[i].value, want[i]);
            }
        }
    }

    #[test]
    fn residual_contract_holds() {
        let g = cycle(30);
        let op = classical_operator(&g, ClassicalKind::Adjacency).unwrap();
        let tol = 1e-8;
        let pairs = top_eigs_symmetric(&op, 3, tol, 5000, 11).unwrap();
        for p in &pairs {
            assert!(p.residual <= tol * p.value.abs().max(1.0));
            assert!((norm(&p.vector) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn random_walk_leading_pair_is_stochastic_fixed_point() {
        let lg = generators::gen_sbm_sym(300, 8.0, 2.0, 4).unwrap();
        let giant = Arc::new(lg.graph.largest_component().unwrap().graph);
        let op = classical_operator(&giant, ClassicalKind::RandomWalk).unwrap();
        let pairs = top_eigs_general(&op, 2, 1e-9, 5000, 2).unwrap();
        assert!((pairs[0].value - 1.0).abs() < 1e-7);
        let v = &pairs[0].vector;
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        for x in v {
            assert!((x - mean).abs() < 1e-6, "leading vector should be constant");
        }
    }

    #[test]
    fn general_solver_reports_unit_spectral_radius_on_cycle_nb() {
        let g = cycle(6);
        let b = operators::nonbacktracking(&g).unwrap();
        let pairs = top_eigs_general(&b, 1, 1e-8, 300, 9).unwrap();
        assert!((pairs[0].magnitude - 1.0).abs() < 1e-6, "magnitude {}", pairs[0].magnitude);
    }

    #[test]
    fn general_solver_matches_symmetric_on_hidden_symmetric_input() {
        struct Hidden<'a>(&'a dyn LinearOp);
        impl LinearOp for Hidden<'_> {
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn apply(&self, x: &[f64], y: &mut [f64]) {
                self.0.apply(x, y)
            }
        }
        let g = complete(9);
        let op = classical_operator(&g, ClassicalKind::Adjacency).unwrap();
        let sym = top_eigs_symmetric(&op, 1, 1e-10, 2000, 3).unwrap();
        let gen = top_eigs_general(&Hidden(&op), 1, 1e-10, 5000, 3).unwrap();
        assert!((sym[0].value - gen[0].value).abs() < 1e-8);
    }

    #[test]
    fn sign_rounding_examples() {
        let p = round_sign(&[1.0, -1.0, 1.0]);
        assert_eq!(p.labels(), &[1, 2, 1]);
        assert!(!p.is_degenerate());
        let z = round_sign(&[0.0, 0.0]);
        assert_eq!(z.labels(), &[2, 2]);
        assert!(z.is_degenerate());
    }

    #[test]
    fn median_rounding_uses_lower_central_statistic() {
        let p = round_median(&[3.0, 1.0, 2.0, 0.0]);
        assert_eq!(p.labels(), &[1, 2, 1, 2]);
    }

    #[test]
    fn sign_rounding_scale_and_flip_invariance() {
        let mut rng = rng::stream(8, "flip");
        let v: Vec<f64> = (0..101).map(|_| rng.random::<f64>() - 0.5).collect();
        let truth_labels: Vec<u32> = (0..101).map(|i| 1 + (i % 2) as u32).collect();
        let truth = Partition::new(truth_labels, 2).unwrap();
        let base = round_sign(&v);
        let scaled = round_sign(&v.iter().map(|x| 3.7 * x).collect::<Vec<_>>());
        assert_eq!(base.labels(), scaled.labels());
        let flipped = round_sign(&v.iter().map(|x| -x).collect::<Vec<_>>());
        let a1 = agreement(&truth, &base).unwrap();
        let a2 = agreement(&truth, &flipped).unwrap();
        assert!((a1 - a2).abs() < 1e-12);
    }

    #[test]
    fn edge_sum_rounding_constant_vector_splits_by_degree_median() {
        // Star plus an edge: degrees separate the center.
        let g = Arc::new(Graph::build(4, &[(0, 1), (0, 2), (0, 3), (1, 2)]).unwrap());
        let des = DirectedEdgeSpace::new(&g);
        let ones = vec![1.0; des.count()];
        let p = round_edge_sums(&ones, &des, 4).unwrap();
        // Scores equal degrees (3,2,2,1); median = 2; only vertex 0 above.
        assert_eq!(p.labels(), &[1, 2, 2, 2]);
        let zeros = vec![0.0; des.count()];
        let z = round_edge_sums(&zeros, &des, 4).unwrap();
        assert!(z.is_degenerate());
        assert!(matches!(round_edge_sums(&[1.0], &des, 4), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn agreement_examples() {
        let t = Partition::new(vec![1, 1, 2, 2], 2).unwrap();
        assert_eq!(agreement(&t, &t).unwrap(), 1.0);
        let flip = Partition::new(vec![2, 2, 1, 1], 2).unwrap();
        assert_eq!(agreement(&t, &flip).unwrap(), 1.0);
        let all_one = Partition::new(vec![1, 1, 1, 1], 2).unwrap();
        assert_eq!(agreement(&t, &all_one).unwrap(), 0.5);
    }

    #[test]
    fn agreement_rejects_bad_inputs() {
        let t = Partition::new(vec![1, 1, 1], 2).unwrap();
        let g = Partition::new(vec![1, 2, 1], 2).unwrap();
        assert!(matches!(agreement(&t, &g), Err(Error::EmptyCommunity(2))));
        let t9 = Partition::new((1..=9).collect(), 9).unwrap();
        let g9 = Partition::new((1..=9).collect(), 9).unwrap();
        assert!(matches!(agreement(&t9, &g9), Err(Error::KTooLarge(9))));
    }

    #[test]
    fn agreement_invariant_under_guess_relabeling() {
        let mut rng = rng::stream(14, "relabel");
        let truth =
            Partition::new((0..60).map(|_| rng.random_range(1..=3u32)).collect(), 3).unwrap();
        let guess =
            Partition::new((0..60).map(|_| rng.random_range(1..=3u32)).collect(), 3).unwrap();
        let base = agreement(&truth, &guess).unwrap();
        for perm in [[2u32, 3, 1], [3, 1, 2], [2, 1, 3]] {
            let relabeled = Partition::new(
                guess.labels().iter().map(|&l| perm[l as usize - 1]).collect(),
                3,
            )
            .unwrap();
            assert!((agreement(&truth, &relabeled).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn random_guess_agreement_near_half() {
        let truth_labels: Vec<u32> = (0..10_000).map(|i| 1 + (i % 2) as u32).collect();
        let truth = Partition::new(truth_labels, 2).unwrap();
        let mut total = 0.0;
        for seed in 0..10 {
            let mut rng = rng::stream(seed, "random-guess");
            let guess =
                Partition::new((0..10_000).map(|_| rng.random_range(1..=2u32)).collect(), 2)
                    .unwrap();
            total += agreement(&truth, &guess).unwrap();
        }
        let mean = total / 10.0;
        assert!((mean - 0.5).abs() <= 0.02, "mean {mean}");
    }

    #[test]
    fn two_cliques_with_bridge_every_method_recovers_exactly() {
        // Cliques {0..7} and {8..15} joined by the edge (0, 8). All
        // methods operating on the graph itself (r = 1 for the powered
        // kinds) recover the split exactly.
        let mut edges = Vec::new();
        for u in 0..8 {
            for v in u + 1..8 {
                edges.push((u, v));
                edges.push((u + 8, v + 8));
            }
        }
        edges.push((0, 8));
        let g = Arc::new(Graph::build(16, &edges).unwrap());
        let truth_labels: Vec<u32> = (0..16).map(|v| if v < 8 { 1 } else { 2 }).collect();
        let truth = Partition::new(truth_labels, 2).unwrap();
        let methods = [
            Method::Adjacency,
            Method::Laplacian,
            Method::NormalizedLaplacian,
            Method::RandomWalk,
            Method::Nonbacktracking,
            Method::PoweredAdjacency { r: RChoice::Fixed(1) },
            Method::PoweredNonbacktracking { r: RChoice::Fixed(1) },
            Method::DistanceMatrix { r: RChoice::Fixed(1) },
        ];
        for method in methods {
            let out = spectral_cluster(&g, &method, 1e-9, 20_000, 5).unwrap();
            let a = agreement(&truth, &out.partition).unwrap();
            assert!(a == 1.0, "{method:?} scored {a}");
        }
    }

    #[test]
    fn powered_methods_twin_only_the_bridge_endpoints() {
        // Squaring the bridge-joined cliques makes the two bridge
        // endpoints twins (identical powered neighborhoods), so they share
        // one community and exactly one of them must land on the wrong
        // side; every other vertex is still recovered.
        let mut edges = Vec::new();
        for u in 0..8 {
            for v in u + 1..8 {
                edges.push((u, v));
                edges.push((u + 8, v + 8));
            }
        }
        edges.push((0, 8));
        let g = Arc::new(Graph::build(16, &edges).unwrap());
        let method = Method::PoweredAdjacency { r: RChoice::Fixed(2) };
        let out = spectral_cluster(&g, &method, 1e-9, 20_000, 5).unwrap();
        let labels = out.partition.labels().to_vec();
        assert_eq!(labels[0], labels[8], "twins must share a side");
        for v in 1..8 {
            assert_eq!(labels[v], labels[1], "clique 1 interior");
            assert_eq!(labels[v + 8], labels[9], "clique 2 interior");
        }
        assert_ne!(labels[1], labels[9], "cliques must separate");
        // The edge-space operator is not subject to vertex twinning; the
        // clique interiors must still separate cleanly.
        let method = Method::PoweredNonbacktracking { r: RChoice::Fixed(2) };
        let out = spectral_cluster(&g, &method, 1e-9, 20_000, 5).unwrap();
        let labels = out.partition.labels().to_vec();
        for v in 1..8 {
            assert_eq!(labels[v], labels[1]);
            assert_eq!(labels[v + 8], labels[9]);
        }
        assert_ne!(labels[1], labels[9]);
    }
}
