//! Weighted graphs, their measures, and spectral quantities.
//!
//! Edge weights are the joint weights of ordered endpoint pairs. An edge
//! `{u, v}` with `u != v` stands for both orientations, so it adds `w` to the
//! weight of each endpoint and `2w` to the oriented edge mass; a loop adds `w`
//! once to each. With this convention the vertex measure is the marginal of
//! the edge measure, and a two-step walk keeps exactly its endpoint law.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }

    /// Weight on the oriented edge measure (before dividing by the total).
    pub fn oriented_weight(&self) -> f64 {
        if self.is_loop() {
            self.w
        } else {
            2.0 * self.w
        }
    }

    pub fn other(&self, x: usize) -> usize {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

#[derive(Clone, Debug)]
pub struct WeightedGraph {
    vertex_count: usize,
    edges: Vec<Edge>,
    weight: Vec<f64>,
    total: f64,
    adjacency: Vec<Vec<usize>>,
}

fn check_weight(w: f64) -> Result<()> {
    if !w.is_finite() || w < 0.0 {
        return Err(Error::invalid(format!("edge weight {w} must be finite and non-negative")));
    }
    Ok(())
}

impl WeightedGraph {
    /// Builds a graph; endpoints are stored with `u <= v`. Parallel edges are kept.
    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut stored = Vec::new();
        let mut weight = vec![0.0; vertex_count];
        let mut adjacency = vec![Vec::new(); vertex_count];
        for (a, b, w) in edges {
            check_weight(w)?;
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::invalid(format!("edge ({a},{b}) outside {vertex_count} vertices")));
            }
            let (u, v) = if a <= b { (a, b) } else { (b, a) };
            let id = stored.len();
            stored.push(Edge { u, v, w });
            weight[u] += w;
            adjacency[u].push(id);
            if u != v {
                weight[v] += w;
                adjacency[v].push(id);
            }
        }
        let total = weight.iter().sum();
        Ok(WeightedGraph { vertex_count, edges: stored, weight, total, adjacency })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Ids of the edges at `v`; a loop appears once.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn weight(&self, v: usize) -> f64 {
        self.weight[v]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    /// Sum of vertex weights.
    pub fn total_weight(&self) -> f64 {
        self.total
    }

    pub fn vertex_measure(&self, v: usize) -> f64 {
        if self.total > 0.0 {
            self.weight[v] / self.total
        } else {
            0.0
        }
    }

    pub fn measure(&self, set: &[usize]) -> f64 {
        if self.total <= 0.0 {
            return 0.0;
        }
        set.iter().map(|&v| self.weight[v]).sum::<f64>() / self.total
    }

    /// Measure of a set of edges (by id) under the oriented edge measure.
    pub fn edge_measure(&self, ids: &[usize]) -> f64 {
        if self.total <= 0.0 {
            return 0.0;
        }
        ids.iter().map(|&e| self.edges[e].oriented_weight()).sum::<f64>() / self.total
    }

    /// Probability that an oriented edge starts in `a` and ends in `b`.
    pub fn pair_measure(&self, a: &[bool], b: &[bool]) -> f64 {
        if self.total <= 0.0 {
            return 0.0;
        }
        let mut mass = 0.0;
        for e in &self.edges {
            if e.is_loop() {
                if a[e.u] && b[e.u] {
                    mass += e.w;
                }
            } else {
                if a[e.u] && b[e.v] {
                    mass += e.w;
                }
                if a[e.v] && b[e.u] {
                    mass += e.w;
                }
            }
        }
        mass / self.total
    }

    /// `mu(E(U, V \ U))` for the set marked in `inside`.
    pub fn boundary_measure(&self, inside: &[bool]) -> f64 {
        let outside: Vec<bool> = inside.iter().map(|b| !b).collect();
        self.pair_measure(inside, &outside)
    }

    pub fn membership(&self, set: &[usize]) -> Vec<bool> {
        let mut m = vec![false; self.vertex_count];
        for &v in set {
            m[v] = true;
        }
        m
    }

    /// Connected components over vertices of positive weight, each sorted,
    /// listed by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.vertex_count).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            if e.w > 0.0 {
                let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for v in 0..self.vertex_count {
            if self.weight[v] > 0.0 {
                let r = find(&mut parent, v);
                groups.entry(r).or_default().push(v);
            }
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort();
        out
    }

    /// Vertices of positive weight.
    pub fn active_vertices(&self) -> Vec<usize> {
        (0..self.vertex_count).filter(|&v| self.weight[v] > 0.0).collect()
    }
}

/// Weighted bipartite graph; edge weights form the joint law of (left, right).
#[derive(Clone, Debug)]
pub struct WeightedBipartiteGraph {
    left_count: usize,
    right_count: usize,
    edges: Vec<(usize, usize, f64)>,
    left_weight: Vec<f64>,
    right_weight: Vec<f64>,
    total: f64,
}

impl WeightedBipartiteGraph {
    pub fn new(left_count: usize, right_count: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut left_weight = vec![0.0; left_count];
        let mut right_weight = vec![0.0; right_count];
        for &(l, r, w) in &edges {
            check_weight(w)?;
            if l >= left_count || r >= right_count {
                return Err(Error::invalid(format!("bipartite edge ({l},{r}) out of range")));
            }
            left_weight[l] += w;
            right_weight[r] += w;
        }
        let total = left_weight.iter().sum();
        Ok(WeightedBipartiteGraph { left_count, right_count, edges, left_weight, right_weight, total })
    }

    pub fn left_count(&self) -> usize {
        self.left_count
    }

    pub fn right_count(&self) -> usize {
        self.right_count
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.total
    }

    pub fn left_measure(&self) -> Vec<f64> {
        self.left_weight.iter().map(|w| w / self.total).collect()
    }

    pub fn right_measure(&self) -> Vec<f64> {
        self.right_weight.iter().map(|w| w / self.total).collect()
    }

    pub fn left_weight(&self, l: usize) -> f64 {
        self.left_weight[l]
    }

    pub fn right_weight(&self, r: usize) -> f64 {
        self.right_weight[r]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenConfig {
    /// Stop once the leading Ritz residual is at most this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Number of vectors iterated together.
    pub block_size: usize,
    pub seed: u64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig { tolerance: 1e-9, max_iterations: 100_000, block_size: 4, seed: 0x5eed }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralReport {
    pub lambda: f64,
    /// Leading vector of the iterated operator, indexed like the input.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

pub(crate) struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project_out(x: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(x, q);
        for (xi, qi) in x.iter_mut().zip(q) {
            *xi -= c * qi;
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect()
}

/// Gram-Schmidt against `fixed` and the earlier columns; collapsed columns are
/// refilled with fresh random directions.
fn orthonormalize(block: &mut [Vec<f64>], fixed: &[Vec<f64>], rng: &mut ChaCha8Rng) {
    let dim = block.first().map_or(0, Vec::len);
    for k in 0..block.len() {
        let mut attempts = 0;
        loop {
            let (done, rest) = block.split_at_mut(k);
            let x = &mut rest[0];
            let before = norm(x);
            for _ in 0..2 {
                project_out(x, fixed);
                project_out(x, done);
            }
            let after = norm(x);
            if after > 1e-10 * before.max(1e-300) && after > 1e-200 {
                x.iter_mut().for_each(|v| *v /= after);
                break;
            }
            attempts += 1;
            assert!(attempts < 64, "cannot extend orthonormal block");
            *x = random_unit(rng, dim);
        }
    }
}

fn combine(block: &[Vec<f64>], coeffs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out = vec![0.0; block[0].len()];
    for (b, c) in block.iter().zip(coeffs) {
        for (o, x) in out.iter_mut().zip(b) {
            *o += c * x;
        }
    }
    out
}

/// Leading eigenpair of a symmetric positive semidefinite operator on the
/// orthogonal complement of `deflate` (orthonormal), by block power iteration
/// with a Rayleigh-Ritz step.
pub(crate) fn top_eigenpair_psd<F>(dim: usize, deflate: &[Vec<f64>], mut apply: F, cfg: &EigenConfig) -> Result<EigenPair>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let free = dim.saturating_sub(deflate.len());
    if free == 0 {
        return Ok(EigenPair { value: 0.0, vector: vec![0.0; dim], iterations: 0, residual: 0.0 });
    }
    let width = cfg.block_size.max(1).min(free);
    let mut rng = rng_for(cfg.seed, &[dim as u64, width as u64]);
    let mut block: Vec<Vec<f64>> = (0..width).map(|_| random_unit(&mut rng, dim)).collect();
    orthonormalize(&mut block, deflate, &mut rng);
    let mut images = vec![vec![0.0; dim]; width];
    let mut residual = f64::INFINITY;
    for iteration in 1..=cfg.max_iterations {
        for (x, y) in block.iter().zip(images.iter_mut()) {
            y.iter_mut().for_each(|v| *v = 0.0);
            apply(x, y);
            project_out(y, deflate);
        }
        let h = DMatrix::from_fn(width, width, |i, j| 0.5 * (dot(&block[i], &images[j]) + dot(&block[j], &images[i])));
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..width).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let ritz: Vec<Vec<f64>> = order.iter().map(|&k| combine(&block, eig.eigenvectors.column(k).iter().copied())).collect();
        let ritz_images: Vec<Vec<f64>> =
            order.iter().map(|&k| combine(&images, eig.eigenvectors.column(k).iter().copied())).collect();
        let theta = eig.eigenvalues[order[0]];
        let r: Vec<f64> = ritz_images[0].iter().zip(&ritz[0]).map(|(y, x)| y - theta * x).collect();
        residual = norm(&r);
        if residual <= cfg.tolerance {
            let mut vector = ritz[0].clone();
            let n = norm(&vector);
            if n > 0.0 {
                vector.iter_mut().for_each(|v| *v /= n);
            }
            return Ok(EigenPair { value: theta.max(0.0), vector, iterations: iteration, residual });
        }
        block = ritz_images;
        orthonormalize(&mut block, deflate, &mut rng);
    }
    Err(Error::NotConverged { iterations: cfg.max_iterations, residual })
}

/// Normalized adjacency restricted to the vertices of positive weight.
struct NormalizedAdjacency {
    active: Vec<usize>,
    entries: Vec<(usize, usize, f64)>,
    sqrt_weight: Vec<f64>,
}

impl NormalizedAdjacency {
    fn new(g: &WeightedGraph) -> Self {
        let active = g.active_vertices();
        let mut local = vec![usize::MAX; g.vertex_count()];
        for (i, &v) in active.iter().enumerate() {
            local[v] = i;
        }
        let entries = g
            .edges()
            .iter()
            .filter(|e| e.w > 0.0)
            .map(|e| (local[e.u], local[e.v], e.w / (g.weight(e.u) * g.weight(e.v)).sqrt()))
            .collect();
        let mut sqrt_weight: Vec<f64> = active.iter().map(|&v| g.weight(v).sqrt()).collect();
        let n = norm(&sqrt_weight);
        sqrt_weight.iter_mut().for_each(|x| *x /= n);
        NormalizedAdjacency { active, entries, sqrt_weight }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(a, b, val) in &self.entries {
            y[a] += val * x[b];
            if a != b {
                y[b] += val * x[a];
            }
        }
    }

    fn lift(&self, local: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (i, &v) in self.active.iter().enumerate() {
            out[v] = local[i];
        }
        out
    }
}

/// Second largest absolute eigenvalue of the normalized adjacency matrix.
/// Vertices of zero weight are ignored; a graph with at most one weighted
/// vertex has `lambda = 0`.
pub fn second_eigenvalue(g: &WeightedGraph, cfg: &EigenConfig) -> Result<SpectralReport> {
    let op = NormalizedAdjacency::new(g);
    let k = op.active.len();
    if k <= 1 {
        return Ok(SpectralReport { lambda: 0.0, vector: vec![0.0; g.vertex_count()], iterations: 0, residual: 0.0 });
    }
    let mut tmp = vec![0.0; k];
    let pair = top_eigenpair_psd(
        k,
        std::slice::from_ref(&op.sqrt_weight),
        |x, y| {
            op.apply(x, &mut tmp);
            op.apply(&tmp, y);
        },
        cfg,
    )?;
    Ok(SpectralReport {
        lambda: pair.value.sqrt().min(1.0),
        vector: op.lift(&pair.vector, g.vertex_count()),
        iterations: pair.iterations,
        residual: pair.residual,
    })
}

/// Second largest signed eigenvalue and its eigenvector.
pub fn second_eigenpair(g: &WeightedGraph, cfg: &EigenConfig) -> Result<SpectralReport> {
    let op = NormalizedAdjacency::new(g);
    let k = op.active.len();
    if k <= 1 {
        return Ok(SpectralReport { lambda: 0.0, vector: vec![0.0; g.vertex_count()], iterations: 0, residual: 0.0 });
    }
    let pair = top_eigenpair_psd(
        k,
        std::slice::from_ref(&op.sqrt_weight),
        |x, y| {
            op.apply(x, y);
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = 0.5 * (*yi + xi);
            }
        },
        cfg,
    )?;
    Ok(SpectralReport {
        lambda: (2.0 * pair.value - 1.0).clamp(-1.0, 1.0),
        vector: op.lift(&pair.vector, g.vertex_count()),
        iterations: pair.iterations,
        residual: pair.residual,
    })
}

/// Norm of the averaging operator of a bipartite graph on functions
/// orthogonal to constants.
pub fn bipartite_operator_norm(g: &WeightedBipartiteGraph, cfg: &EigenConfig) -> Result<SpectralReport> {
    if g.total_weight() <= 0.0 {
        return Err(Error::invalid("bipartite graph has no weight"));
    }
    // Iterate on whichever side is smaller; both share the nontrivial spectrum.
    let iterate_left = g.left_count() <= g.right_count();
    let (side_weight, other_weight): (&[f64], &[f64]) =
        if iterate_left { (&g.left_weight, &g.right_weight) } else { (&g.right_weight, &g.left_weight) };
    let active: Vec<usize> = (0..side_weight.len()).filter(|&i| side_weight[i] > 0.0).collect();
    let mut local = vec![usize::MAX; side_weight.len()];
    for (i, &v) in active.iter().enumerate() {
        local[v] = i;
    }
    let entries: Vec<(usize, usize, f64)> = g
        .edges()
        .iter()
        .filter(|e| e.2 > 0.0)
        .map(|&(l, r, w)| {
            let (a, b) = if iterate_left { (l, r) } else { (r, l) };
            (local[a], b, w / (side_weight[a] * other_weight[b]).sqrt())
        })
        .collect();
    let k = active.len();
    if k <= 1 {
        return Ok(SpectralReport { lambda: 0.0, vector: vec![0.0; side_weight.len()], iterations: 0, residual: 0.0 });
    }
    let mut top: Vec<f64> = active.iter().map(|&v| side_weight[v].sqrt()).collect();
    let n = norm(&top);
    top.iter_mut().for_each(|x| *x /= n);
    let mut mid = vec![0.0; other_weight.len()];
    let pair = top_eigenpair_psd(
        k,
        std::slice::from_ref(&top),
        |x, y| {
            mid.iter_mut().for_each(|v| *v = 0.0);
            for &(a, b, val) in &entries {
                mid[b] += val * x[a];
            }
            for &(a, b, val) in &entries {
                y[a] += val * mid[b];
            }
        },
        cfg,
    )?;
    let mut vector = vec![0.0; side_weight.len()];
    for (i, &v) in active.iter().enumerate() {
        vector[v] = pair.vector[i];
    }
    Ok(SpectralReport { lambda: pair.value.sqrt().min(1.0), vector, iterations: pair.iterations, residual: pair.residual })
}

/// Graph on the left side of `g` whose edge `(a, b)` carries the probability
/// of the walk `a -> r -> b`: draw `a` from `left_law`, a neighbour `r` of `a`
/// in proportion to edge weight, then an independent parent `b` of `r`.
pub fn two_step_walk(g: &WeightedBipartiteGraph, left_law: &[f64]) -> Result<WeightedGraph> {
    if left_law.len() != g.left_count() {
        return Err(Error::invalid("left law length differs from left side"));
    }
    let mass: f64 = left_law.iter().sum();
    if !(mass > 0.0) || left_law.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid("left law must be non-negative with positive mass"));
    }
    let degree: Vec<f64> = (0..g.left_count()).map(|l| g.left_weight(l)).collect();
    let mut parents: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g.right_count()];
    for &(l, r, w) in g.edges() {
        if left_law[l] > 0.0 && w > 0.0 {
            parents[r].push((l, left_law[l] / mass * w / degree[l]));
        }
    }
    if let Some(l) = (0..g.left_count()).find(|&l| left_law[l] > 0.0 && degree[l] <= 0.0) {
        return Err(Error::invalid(format!("left vertex {l} has positive law but no neighbours")));
    }
    let mut weight: HashMap<(usize, usize), f64> = HashMap::new();
    for list in &parents {
        let down: f64 = list.iter().map(|p| p.1).sum();
        if down <= 0.0 {
            continue;
        }
        for (i, &(a, qa)) in list.iter().enumerate() {
            for &(b, qb) in &list[i..] {
                let key = if a <= b { (a, b) } else { (b, a) };
                *weight.entry(key).or_insert(0.0) += qa * qb / down;
            }
        }
    }
    let mut edges: Vec<(usize, usize, f64)> = weight.into_iter().map(|((a, b), w)| (a, b, w)).collect();
    edges.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    WeightedGraph::new(g.left_count(), edges)
}

/// An induced subgraph together with the original id of each local vertex.
#[derive(Clone, Debug)]
pub struct Subgraph {
    pub graph: WeightedGraph,
    pub vertices: Vec<usize>,
}

pub fn induced_subgraph(g: &WeightedGraph, subset: &[usize]) -> Result<Subgraph> {
    let mut vertices = subset.to_vec();
    vertices.sort_unstable();
    vertices.dedup();
    let mut local = vec![usize::MAX; g.vertex_count()];
    for (i, &v) in vertices.iter().enumerate() {
        if v >= g.vertex_count() {
            return Err(Error::invalid(format!("vertex {v} outside graph")));
        }
        local[v] = i;
    }
    let edges = g
        .edges()
        .iter()
        .filter(|e| local[e.u] != usize::MAX && local[e.v] != usize::MAX)
        .map(|e| (local[e.u], local[e.v], e.w));
    Ok(Subgraph { graph: WeightedGraph::new(vertices.len(), edges)?, vertices })
}

/// `mu(E(U, V \ U)) / mu(U)`.
pub fn conductance(g: &WeightedGraph, set: &[usize]) -> f64 {
    let mu = g.measure(set);
    if mu <= 0.0 {
        return f64::INFINITY;
    }
    g.boundary_measure(&g.membership(set)) / mu
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cut {
    /// Sorted vertex ids of the lighter side.
    pub vertices: Vec<usize>,
    pub measure: f64,
    pub boundary: f64,
    pub conductance: f64,
    /// Second largest signed eigenvalue used for the sweep.
    pub lambda2: f64,
}

const TIE: f64 = 1e-12;

fn better_cut(cand: (f64, &[usize]), best: (f64, &[usize])) -> bool {
    if cand.0 < best.0 - TIE {
        return true;
    }
    if cand.0 > best.0 + TIE {
        return false;
    }
    (cand.1.len(), cand.1) < (best.1.len(), best.1)
}

/// Sweep cut along the second eigenvector, normalized by `sqrt(w)`. Among
/// the sweep cuts the side of measure at most one half is taken; the cut of
/// least conductance wins, ties going to the smaller and then the
/// lexicographically first vertex set. A disconnected graph yields its
/// lightest component at conductance zero.
pub fn cheeger_cut(g: &WeightedGraph, cfg: &EigenConfig) -> Result<Cut> {
    let active = g.active_vertices();
    if active.len() < 2 {
        return Err(Error::Precondition("cheeger cut needs two weighted vertices".into()));
    }
    let components = g.components();
    if components.len() > 1 {
        let best = components
            .iter()
            .min_by(|a, b| {
                let (ma, mb) = (g.measure(a), g.measure(b));
                if (ma - mb).abs() > TIE {
                    ma.total_cmp(&mb)
                } else {
                    (a.len(), a).cmp(&(b.len(), b))
                }
            })
            .expect("components");
        return Ok(Cut { vertices: best.clone(), measure: g.measure(best), boundary: 0.0, conductance: 0.0, lambda2: 1.0 });
    }
    let report = second_eigenpair(g, cfg)?;
    let mut order = active.clone();
    let score = |v: usize| report.vector[v] / g.weight(v).sqrt();
    order.sort_by(|&a, &b| score(a).total_cmp(&score(b)).then(a.cmp(&b)));
    let total = g.total_weight();
    let mut inside = vec![false; g.vertex_count()];
    let mut volume = 0.0;
    let mut boundary = 0.0;
    let mut best: Option<(f64, Vec<usize>, f64, f64)> = None;
    for k in 0..order.len() - 1 {
        let v = order[k];
        inside[v] = true;
        volume += g.weight(v);
        for &id in g.incident(v) {
            let e = &g.edges()[id];
            if e.is_loop() {
                continue;
            }
            if inside[e.other(v)] {
                boundary -= e.w;
            } else {
                boundary += e.w;
            }
        }
        let prefix = volume / total;
        let cut_mass = boundary.max(0.0) / total;
        for take_prefix in [true, false] {
            let side_measure = if take_prefix { prefix } else { 1.0 - prefix };
            if side_measure > 0.5 + TIE {
                continue;
            }
            let phi = cut_mass / side_measure;
            let side = || -> Vec<usize> {
                let mut s: Vec<usize> = if take_prefix { order[..=k].to_vec() } else { order[k + 1..].to_vec() };
                s.sort_unstable();
                s
            };
            let replace = match &best {
                None => true,
                Some((bphi, bset, _, _)) => {
                    if phi < bphi - TIE {
                        true
                    } else if phi > bphi + TIE {
                        false
                    } else {
                        better_cut((phi, &side()), (*bphi, bset))
                    }
                }
            };
            if replace {
                best = Some((phi, side(), side_measure, cut_mass));
            }
        }
    }
    let (phi, vertices, measure, boundary) = best.expect("at least one sweep cut");
    Ok(Cut { vertices, measure, boundary, conductance: phi, lambda2: report.lambda })
}

/// `|E[f(right) h(left)] - E[f] E[h]|` under the edge law of `g`.
pub fn mixing_defect(g: &WeightedBipartiteGraph, f_right: &[f64], h_left: &[f64]) -> f64 {
    let total = g.total_weight();
    let joint: f64 = g.edges().iter().map(|&(l, r, w)| w * f_right[r] * h_left[l]).sum::<f64>() / total;
    let ef: f64 = g.right_measure().iter().zip(f_right).map(|(p, x)| p * x).sum();
    let eh: f64 = g.left_measure().iter().zip(h_left).map(|(p, x)| p * x).sum();
    (joint - ef * eh).abs()
}

/// Ratio of the mean squared edge length of an embedding to the mean squared
/// distance between two independent vertices. `None` when the embedding is
/// constant.
pub fn laplacian_quotient(g: &WeightedGraph, z: &[Vec<f64>]) -> Option<f64> {
    let total = g.total_weight();
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let num: f64 = g.edges().iter().filter(|e| !e.is_loop()).map(|e| 2.0 * e.w * dist2(&z[e.u], &z[e.v])).sum::<f64>() / total;
    let dim = z.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; dim];
    let mut second = 0.0;
    for v in 0..g.vertex_count() {
        let p = g.vertex_measure(v);
        second += p * dot(&z[v], &z[v]);
        for (m, x) in mean.iter_mut().zip(&z[v]) {
            *m += p * x;
        }
    }
    let den = 2.0 * (second - dot(&mean, &mean));
    (den > 1e-15).then(|| num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::Rng;

    fn dense_adjacency(g: &WeightedGraph) -> DMatrix<f64> {
        let n = g.vertex_count();
        let mut a = DMatrix::zeros(n, n);
        for e in g.edges() {
            let val = e.w / (g.weight(e.u) * g.weight(e.v)).sqrt();
            a[(e.u, e.v)] += val;
            if !e.is_loop() {
                a[(e.v, e.u)] += val;
            }
        }
        a
    }

    /// Dense oracle: second largest |eigenvalue| and second largest eigenvalue.
    fn dense_spectrum(g: &WeightedGraph) -> (f64, f64) {
        let eig = dense_adjacency(g).symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        let mut abs: Vec<f64> = vals[1..].iter().map(|x| x.abs()).collect();
        abs.sort_by(|a, b| b.total_cmp(a));
        (abs[0], vals[1])
    }

    fn cycle(n: usize) -> WeightedGraph {
        WeightedGraph::new(n, (0..n).map(|i| (i, (i + 1) % n, 1.0))).unwrap()
    }

    fn complete(n: usize) -> WeightedGraph {
        let mut e = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                e.push((i, j, 1.0));
            }
        }
        WeightedGraph::new(n, e).unwrap()
    }

    fn random_graph(seed: u64, n: usize, p: f64, loops: bool) -> WeightedGraph {
        let mut rng = rng_for(seed, &[]);
        let mut e = Vec::new();
        for i in 0..n {
            e.push((i, (i + 1) % n, 0.5 + rng.gen::<f64>()));
            for j in i..n {
                if (i != j || loops) && rng.gen::<f64>() < p {
                    e.push((i, j, rng.gen::<f64>() + 0.01));
                }
            }
        }
        WeightedGraph::new(n, e).unwrap()
    }

    #[test]
    fn complete_graph_spectrum() {
        let r = second_eigenvalue(&complete(6), &EigenConfig::default()).unwrap();
        assert!((r.lambda - 0.2).abs() < 1e-9);
    }

    #[test]
    fn bipartite_cycle_has_lambda_one() {
        let r = second_eigenvalue(&cycle(8), &EigenConfig::default()).unwrap();
        assert!((r.lambda - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_vertex_is_zero() {
        let g = WeightedGraph::new(1, [(0, 0, 2.0)]).unwrap();
        assert_eq!(second_eigenvalue(&g, &EigenConfig::default()).unwrap().lambda, 0.0);
    }

    #[test]
    fn matches_dense_oracle_on_random_graphs() {
        for seed in 0..20 {
            let g = random_graph(seed, 5 + (seed as usize % 9), 0.3, seed % 2 == 0);
            let (abs, signed) = dense_spectrum(&g);
            let r = second_eigenvalue(&g, &EigenConfig::default()).unwrap();
            assert!((r.lambda - abs).abs() < 1e-6, "seed {seed}: {} vs {abs}", r.lambda);
            let s = second_eigenpair(&g, &EigenConfig::default()).unwrap();
            assert!((s.lambda - signed).abs() < 1e-6, "seed {seed}: {} vs {signed}", s.lambda);
        }
    }

    #[test]
    fn top_eigenvector_is_sqrt_weight() {
        let g = random_graph(3, 7, 0.4, true);
        let a = dense_adjacency(&g);
        let x = DMatrix::from_iterator(7, 1, (0..7).map(|v| g.weight(v).sqrt()));
        let y = &a * &x;
        assert!((y - x).norm() < 1e-12);
    }

    #[test]
    fn loop_counts_once_in_weight_and_edge_mass() {
        let g = WeightedGraph::new(2, [(0, 0, 1.0), (0, 1, 2.0)]).unwrap();
        assert_eq!(g.weight(0), 3.0);
        assert_eq!(g.weight(1), 2.0);
        assert_eq!(g.total_weight(), 5.0);
        assert!((g.edge_measure(&[0, 1]) - 1.0).abs() < 1e-15);
        assert!((g.edge_measure(&[0]) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_weights() {
        assert!(WeightedGraph::new(2, [(0, 1, -1.0)]).is_err());
        assert!(WeightedGraph::new(2, [(0, 2, 1.0)]).is_err());
    }

    fn dense_bipartite_norm(g: &WeightedBipartiteGraph) -> f64 {
        let b = DMatrix::from_fn(g.left_count(), g.right_count(), |l, r| {
            let w: f64 = g.edges().iter().filter(|e| e.0 == l && e.1 == r).map(|e| e.2).sum();
            if w == 0.0 {
                0.0
            } else {
                w / (g.left_weight(l) * g.right_weight(r)).sqrt()
            }
        });
        let mut s: Vec<f64> = b.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s.get(1).copied().unwrap_or(0.0)
    }

    #[test]
    fn bipartite_norm_examples() {
        let cfg = EigenConfig::default();
        let mut full = Vec::new();
        for l in 0..3 {
            for r in 0..4 {
                full.push((l, r, 1.0));
            }
        }
        let kb = WeightedBipartiteGraph::new(3, 4, full.clone()).unwrap();
        assert!(bipartite_operator_norm(&kb, &cfg).unwrap().lambda < 1e-9);
        let matching = WeightedBipartiteGraph::new(4, 4, (0..4).map(|i| (i, i, 1.0)).collect()).unwrap();
        assert!((bipartite_operator_norm(&matching, &cfg).unwrap().lambda - 1.0).abs() < 1e-9);
        let mut minus: Vec<_> = (0..3).flat_map(|l| (0..3).map(move |r| (l, r, 1.0))).collect();
        minus.remove(4);
        let g = WeightedBipartiteGraph::new(3, 3, minus).unwrap();
        let oracle = dense_bipartite_norm(&g);
        assert!((bipartite_operator_norm(&g, &cfg).unwrap().lambda - oracle).abs() < 1e-7);
    }

    #[test]
    fn two_step_walk_of_complete_bipartite_is_uniform() {
        let edges: Vec<_> = (0..4).flat_map(|l| (0..3).map(move |r| (l, r, 1.0))).collect();
        let g = WeightedBipartiteGraph::new(4, 3, edges).unwrap();
        let walk = two_step_walk(&g, &[0.25; 4]).unwrap();
        for e in walk.edges() {
            assert!((e.w - 1.0 / 16.0).abs() < 1e-15);
        }
        assert_eq!(walk.edges().len(), 10);
        for v in 0..4 {
            assert!((walk.weight(v) - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn two_step_walk_rejects_stranded_left_vertex() {
        let g = WeightedBipartiteGraph::new(2, 1, vec![(0, 0, 1.0)]).unwrap();
        assert!(two_step_walk(&g, &[0.5, 0.5]).is_err());
    }

    fn exhaustive_expansion(g: &WeightedGraph) -> f64 {
        let n = g.vertex_count();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) - 1 {
            let set: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            if g.measure(&set) <= 0.5 + 1e-12 {
                best = best.min(conductance(g, &set));
            }
        }
        best
    }

    #[test]
    fn two_cliques_split_at_the_bridge() {
        let mut e = Vec::new();
        for base in [0, 4] {
            for i in 0..4 {
                for j in i + 1..4 {
                    e.push((base + i, base + j, 1.0));
                }
            }
        }
        e.push((3, 4, 0.01));
        let g = WeightedGraph::new(8, e).unwrap();
        let cut = cheeger_cut(&g, &EigenConfig::default()).unwrap();
        assert_eq!(cut.vertices, vec![0, 1, 2, 3]);
        assert!((cut.conductance - exhaustive_expansion(&g)).abs() < 1e-12);
    }

    #[test]
    fn disconnected_graph_cuts_lightest_component() {
        let g = WeightedGraph::new(5, [(0, 1, 1.0), (2, 3, 2.0), (3, 4, 2.0)]).unwrap();
        let cut = cheeger_cut(&g, &EigenConfig::default()).unwrap();
        assert_eq!(cut.vertices, vec![0, 1]);
        assert_eq!(cut.conductance, 0.0);
    }

    #[test]
    fn sweep_respects_cheeger_bound_on_random_graphs() {
        for seed in 0..30 {
            let g = random_graph(100 + seed, 6 + (seed as usize % 6), 0.35, seed % 3 == 0);
            let cut = cheeger_cut(&g, &EigenConfig::default()).unwrap();
            let h = exhaustive_expansion(&g);
            assert!(cut.measure <= 0.5 + 1e-12);
            assert!(cut.conductance >= h - 1e-12);
            assert!(cut.conductance <= (2.0 * (1.0 - cut.lambda2)).sqrt() + 1e-6, "seed {seed}");
            assert!((conductance(&g, &cut.vertices) - cut.conductance).abs() < 1e-9);
        }
    }

    #[test]
    fn induced_subgraph_keeps_inner_edges() {
        let g = complete(5);
        let s = induced_subgraph(&g, &[4, 1, 2]).unwrap();
        assert_eq!(s.vertices, vec![1, 2, 4]);
        assert_eq!(s.graph.edges().len(), 3);
    }

    proptest! {
        #[test]
        fn measures_sum_to_one(seed in 0u64..500, n in 2usize..9) {
            let g = random_graph(seed, n, 0.4, true);
            let all: Vec<usize> = (0..g.edges().len()).collect();
            prop_assert!((g.edge_measure(&all) - 1.0).abs() < 1e-12);
            let verts: Vec<usize> = (0..n).collect();
            prop_assert!((g.measure(&verts) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn expander_mixing_holds(seed in 0u64..300) {
            let mut rng = rng_for(seed, &[1]);
            let (nl, nr) = (2 + seed as usize % 5, 2 + seed as usize % 4);
            let mut edges = Vec::new();
            for l in 0..nl {
                edges.push((l, l % nr, 1.0));
                for r in 0..nr {
                    if rng.gen::<f64>() < 0.5 {
                        edges.push((l, r, rng.gen::<f64>()));
                    }
                }
            }
            let g = WeightedBipartiteGraph::new(nl, nr, edges).unwrap();
            let lambda = bipartite_operator_norm(&g, &EigenConfig::default()).unwrap().lambda;
            let f: Vec<f64> = (0..nr).map(|_| rng.gen()).collect();
            let h: Vec<f64> = (0..nl).map(|_| rng.gen()).collect();
            let ef: f64 = g.right_measure().iter().zip(&f).map(|(p, x)| p * x).sum();
            let eh: f64 = g.left_measure().iter().zip(&h).map(|(p, x)| p * x).sum();
            prop_assert!(mixing_defect(&g, &f, &h) <= lambda * (ef * eh).sqrt() + 1e-9);
        }

        #[test]
        fn laplacian_quotient_at_least_spectral_gap(seed in 0u64..300) {
            let g = random_graph(seed, 4 + seed as usize % 6, 0.5, true);
            let lambda = second_eigenvalue(&g, &EigenConfig::default()).unwrap().lambda;
            let mut rng = rng_for(seed, &[2]);
            let z: Vec<Vec<f64>> = (0..g.vertex_count()).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
            if let Some(q) = laplacian_quotient(&g, &z) {
                prop_assert!(q >= 1.0 - lambda - 1e-9);
            }
        }

        #[test]
        fn induced_measures_rescale(seed in 0u64..300) {
            let g = random_graph(seed, 8, 0.4, true);
            let mut rng = rng_for(seed, &[3]);
            let keep: Vec<usize> = (0..8).filter(|_| rng.gen::<f64>() < 0.6).collect();
            prop_assume!(keep.len() >= 2);
            let sub = induced_subgraph(&g, &keep).unwrap();
            prop_assume!(sub.graph.total_weight() > 0.0);
            let inside = g.membership(&keep);
            let inner = g.pair_measure(&inside, &inside);
            let part: Vec<usize> = keep.iter().copied().filter(|_| rng.gen::<f64>() < 0.5).collect();
            let local: Vec<usize> = part.iter().map(|v| sub.vertices.binary_search(v).unwrap()).collect();
            let lhs = sub.graph.measure(&local);
            let rhs = g.pair_measure(&g.membership(&part), &inside) / inner;
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
