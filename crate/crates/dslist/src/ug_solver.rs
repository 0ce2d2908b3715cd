//! Unique-games solving: a factorized SDP relaxation, rounding from normalized
//! vectors, list solving by peeling assignments, and a brute-force oracle.
//!
//! Each vertex carries `labels` mutually orthogonal vectors of dimension
//! `rank` whose squared norms sum to one. Those two constraint families hold
//! exactly by construction (`X_u = Q diag(s)` with orthonormal `Q` and unit
//! `s`); the triangle inequalities are enforced by penalties on an active set
//! grown from sampled violations.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::rng::rng_for;
use crate::ug_instance::UgInstance;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Rounding radius base `R`; the radius is drawn from `[R, 2R]`.
    pub rounding_radius: f64,
    /// Vector dimension; `None` uses the label count.
    pub rank: Option<usize>,
    pub max_sweeps: usize,
    /// Stop sweeping once a sweep lowers the objective by less than this.
    pub sweep_tolerance: f64,
    pub triangle_samples: usize,
    pub max_epochs: usize,
    pub penalty: f64,
    pub penalty_growth: f64,
    pub constraint_tolerance: f64,
    pub retries: usize,
    pub seed: u64,
    /// List solving stops once a round's rounded value drops below this.
    pub value_floor: f64,
    /// Cap on list-solving rounds; `None` allows one per label.
    pub max_rounds: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rounding_radius: 0.1,
            rank: None,
            max_sweeps: 500,
            sweep_tolerance: 1e-7,
            triangle_samples: 20_000,
            max_epochs: 30,
            penalty: 1.0,
            penalty_growth: 2.0,
            constraint_tolerance: 1e-6,
            retries: 32,
            seed: 0,
            value_floor: 0.7,
            max_rounds: None,
        }
    }
}

impl SolverConfig {
    /// A lighter budget for the decoder, whose constraint graphs have
    /// hundreds of vertices and labels.
    pub fn budgeted() -> Self {
        SolverConfig { max_sweeps: 15, max_epochs: 1, max_rounds: Some(4), ..SolverConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rounding_radius > 0.0 && self.rounding_radius < 1.0) {
            return Err(Error::invalid("rounding radius must lie in (0, 1)"));
        }
        if self.max_rounds == Some(0) {
            return Err(Error::invalid("max_rounds must be positive"));
        }
        if self.retries == 0 {
            return Err(Error::invalid("at least one rounding attempt is required"));
        }
        if !(self.penalty > 0.0 && self.penalty_growth >= 1.0) {
            return Err(Error::invalid("penalty must be positive and its growth at least one"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ResidualReport {
    pub tolerance: f64,
    pub max_orthogonality: f64,
    pub max_normalization: f64,
    pub triangle_checked: usize,
    pub triangle_violations: usize,
    pub max_triangle_violation: f64,
    /// Whether every triangle inequality was checked rather than a sample.
    pub exhaustive: bool,
}

impl ResidualReport {
    pub fn within_tolerance(&self) -> bool {
        self.max_orthogonality <= self.tolerance && self.max_normalization <= self.tolerance && self.triangle_violations == 0
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpSolution {
    pub labels: usize,
    pub rank: usize,
    /// Per vertex, the label vectors stored column after column.
    pub vectors: Vec<Vec<f64>>,
    pub objective: f64,
    pub residuals: ResidualReport,
    pub sweeps: usize,
    pub converged: bool,
}

impl SdpSolution {
    pub fn vector(&self, v: usize, i: usize) -> &[f64] {
        &self.vectors[v][i * self.rank..(i + 1) * self.rank]
    }

    pub fn norm2(&self, v: usize, i: usize) -> f64 {
        dot(self.vector(v, i), self.vector(v, i))
    }

    /// Wraps given vectors (`vectors[v][i]`, all of one length) and scores them.
    pub fn from_vectors(inst: &UgInstance, vectors: &[Vec<Vec<f64>>], cfg: &SolverConfig) -> Result<Self> {
        let labels = inst.labels();
        if vectors.len() != inst.vertex_count() || vectors.iter().any(|v| v.len() != labels) {
            return Err(Error::invalid("need one vector per vertex and label"));
        }
        let rank = vectors.first().and_then(|v| v.first()).map_or(0, Vec::len);
        if rank == 0 || vectors.iter().flatten().any(|x| x.len() != rank) {
            return Err(Error::invalid("label vectors must share a positive dimension"));
        }
        let flat = vectors.iter().map(|v| v.concat()).collect();
        let mut sol = SdpSolution { labels, rank, vectors: flat, objective: 0.0, residuals: ResidualReport::default(), sweeps: 0, converged: true };
        sol.objective = sdp_objective(inst, &sol);
        sol.residuals = residuals(inst, &sol, cfg.constraint_tolerance, cfg.triangle_samples, cfg.seed);
        Ok(sol)
    }

    /// Embedding of an assignment: the assigned label gets the normalized
    /// all-ones vector, the others zero.
    pub fn integral(inst: &UgInstance, a: &[usize], rank: usize, cfg: &SolverConfig) -> Result<Self> {
        let labels = inst.labels();
        if a.len() != inst.vertex_count() || a.iter().any(|&x| x >= labels) {
            return Err(Error::invalid("assignment does not match the instance"));
        }
        let one = vec![1.0 / (rank as f64).sqrt(); rank];
        let vectors: Vec<Vec<Vec<f64>>> =
            a.iter().map(|&x| (0..labels).map(|i| if i == x { one.clone() } else { vec![0.0; rank] }).collect()).collect();
        Self::from_vectors(inst, &vectors, cfg)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], c: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

/// `(1/omega) sum_(u,v) w sum_i |u_i - v_pi(i)|^2` over oriented edges.
pub fn sdp_objective(inst: &UgInstance, sol: &SdpSolution) -> f64 {
    let g = inst.graph();
    let total = g.total_weight();
    if total <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (id, e) in g.edges().iter().enumerate() {
        let pi = inst.constraint(id);
        let mut d = 0.0;
        for (i, &j) in pi.iter().enumerate() {
            let (a, b) = (sol.vector(e.u, i), sol.vector(e.v, j));
            d += a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        }
        sum += e.oriented_weight() * d;
    }
    sum / total
}

/// One of the triangle inequalities, in the form `violation <= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Triangle {
    /// `|u_i - v_j|^2 <= |u_i|^2 + |v_j|^2`, i.e. `<u_i, v_j> >= 0`.
    NonNegative([(usize, usize); 2]),
    /// `|u_i|^2 <= |u_i - v_j|^2 + |v_j|^2`, i.e. `<u_i, v_j> <= |v_j|^2`.
    Dominated([(usize, usize); 2]),
    /// `|u_i - x_l|^2 <= |u_i - v_j|^2 + |v_j - x_l|^2`, with `v_j` in the middle.
    Path([(usize, usize); 3]),
}

impl Triangle {
    fn violation(&self, sol: &SdpSolution) -> f64 {
        let vec = |p: (usize, usize)| sol.vector(p.0, p.1);
        match *self {
            Triangle::NonNegative([a, b]) => -dot(vec(a), vec(b)),
            Triangle::Dominated([a, b]) => dot(vec(a), vec(b)) - dot(vec(b), vec(b)),
            Triangle::Path([a, c, d]) => {
                let (a, c, d) = (vec(a), vec(c), vec(d));
                -a.iter().zip(c).zip(d).map(|((x, y), z)| (x - y) * (z - y)).sum::<f64>()
            }
        }
    }

    fn points(&self) -> &[(usize, usize)] {
        match self {
            Triangle::NonNegative(p) | Triangle::Dominated(p) => p,
            Triangle::Path(p) => p,
        }
    }

    /// Adds `-scale * d(violation)/d(vector)` for every occurrence of vertex `u`.
    fn add_gradient(&self, sol: &SdpSolution, u: usize, scale: f64, out: &mut [f64]) {
        let rank = sol.rank;
        let vec = |p: (usize, usize)| sol.vector(p.0, p.1);
        let mut put = |p: (usize, usize), coeffs: &[(f64, &[f64])]| {
            if p.0 == u {
                let col = &mut out[p.1 * rank..(p.1 + 1) * rank];
                for &(c, x) in coeffs {
                    axpy(col, -scale * c, x);
                }
            }
        };
        match *self {
            Triangle::NonNegative([a, b]) => {
                put(a, &[(-1.0, vec(b))]);
                put(b, &[(-1.0, vec(a))]);
            }
            Triangle::Dominated([a, b]) => {
                put(a, &[(1.0, vec(b))]);
                put(b, &[(1.0, vec(a)), (-2.0, vec(b))]);
            }
            Triangle::Path([a, c, d]) => {
                let (va, vc, vd) = (vec(a), vec(c), vec(d));
                put(a, &[(-1.0, vd), (1.0, vc)]);
                put(d, &[(-1.0, va), (1.0, vc)]);
                put(c, &[(1.0, vd), (1.0, va), (-2.0, vc)]);
            }
        }
    }
}

/// All triangle inequalities when there are at most `budget`, else a sample.
fn triangle_candidates(n: usize, labels: usize, budget: usize, rng: &mut ChaCha8Rng) -> (Vec<Triangle>, bool) {
    let points = n * labels;
    let all = points.saturating_mul(points).saturating_mul(points + 2);
    let point = |k: usize| (k / labels, k % labels);
    if all <= budget {
        let mut out = Vec::with_capacity(all);
        for a in 0..points {
            for b in 0..points {
                out.push(Triangle::NonNegative([point(a), point(b)]));
                out.push(Triangle::Dominated([point(a), point(b)]));
                for c in 0..points {
                    out.push(Triangle::Path([point(a), point(b), point(c)]));
                }
            }
        }
        return (out, true);
    }
    let mut pick = || point(rng.gen_range(0..points));
    let out = (0..budget)
        .map(|k| match k % 3 {
            0 => Triangle::NonNegative([pick(), pick()]),
            1 => Triangle::Dominated([pick(), pick()]),
            _ => Triangle::Path([pick(), pick(), pick()]),
        })
        .collect();
    (out, false)
}

pub fn residuals(inst: &UgInstance, sol: &SdpSolution, tolerance: f64, samples: usize, seed: u64) -> ResidualReport {
    let mut report = ResidualReport { tolerance, ..Default::default() };
    for v in 0..inst.vertex_count() {
        let mut total = 0.0;
        for i in 0..sol.labels {
            total += sol.norm2(v, i);
            for j in i + 1..sol.labels {
                report.max_orthogonality = report.max_orthogonality.max(dot(sol.vector(v, i), sol.vector(v, j)).abs());
            }
        }
        report.max_normalization = report.max_normalization.max((total - 1.0).abs());
    }
    let mut rng = rng_for(seed, &[0x7e5]);
    let (candidates, exhaustive) = triangle_candidates(inst.vertex_count(), sol.labels, samples, &mut rng);
    report.exhaustive = exhaustive;
    report.triangle_checked = candidates.len();
    for c in &candidates {
        let viol = c.violation(sol);
        if viol > tolerance {
            report.triangle_violations += 1;
        }
        report.max_triangle_violation = report.max_triangle_violation.max(viol.max(0.0));
    }
    report
}

/// Maximizes `<Q diag(s), b>` over orthonormal `Q` (`rank x labels`) and unit
/// `s` by alternating a polar step for `Q` and a closed-form step for `s`.
fn block_update(current: &[f64], b: &[f64], rank: usize, labels: usize) -> Option<Vec<f64>> {
    let bm = DMatrix::from_column_slice(rank, labels, b);
    if bm.norm() < 1e-300 {
        return None;
    }
    let mut s: Vec<f64> = (0..labels).map(|i| dot(&current[i * rank..(i + 1) * rank], &current[i * rank..(i + 1) * rank]).sqrt()).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..4 {
        let scaled = DMatrix::from_fn(rank, labels, |r, c| bm[(r, c)] * s[c].max(1e-3));
        let svd = scaled.svd(true, true);
        let q = svd.u.expect("u requested") * svd.v_t.expect("v requested");
        let diag: Vec<f64> = (0..labels).map(|c| q.column(c).dot(&bm.column(c))).collect();
        let norm = diag.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            break;
        }
        s = diag.iter().map(|x| x / norm).collect();
        let x: Vec<f64> = (0..labels).flat_map(|c| q.column(c).iter().map(|v| v * s[c]).collect::<Vec<_>>()).collect();
        let value = dot(&x, b);
        if best.as_ref().is_none_or(|(bv, _)| value > *bv + 1e-15) {
            best = Some((value, x));
        } else {
            break;
        }
    }
    let (value, x) = best?;
    (value > dot(current, b) + 1e-15).then_some(x)
}

fn random_start(rank: usize, labels: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = DMatrix::from_fn(rank, labels, |_, _| rng.gen::<f64>() - 0.5);
    let q = m.qr().q();
    let scale = 1.0 / (labels as f64).sqrt();
    (0..labels).flat_map(|c| q.column(c).iter().map(|v| v * scale).collect::<Vec<_>>()).collect()
}

/// `(rho/2) (max(0, g + y/rho)^2 - (y/rho)^2)` for an inequality `g <= 0`
/// with multiplier `y`.
fn augmented(g: f64, y: f64, rho: f64) -> f64 {
    let shifted = (g + y / rho).max(0.0);
    0.5 * rho * (shifted * shifted - (y / rho) * (y / rho))
}

/// Active triangle inequalities with their multipliers.
struct Penalties {
    active: Vec<Triangle>,
    multipliers: Vec<f64>,
    seen: HashSet<Triangle>,
    by_vertex: Vec<Vec<usize>>,
    rho: f64,
}

impl Penalties {
    fn new(n: usize, rho: f64) -> Self {
        Penalties { active: Vec::new(), multipliers: Vec::new(), seen: HashSet::new(), by_vertex: vec![Vec::new(); n], rho }
    }

    fn add(&mut self, c: Triangle) -> bool {
        if !self.seen.insert(c) {
            return false;
        }
        let k = self.active.len();
        let mut vs: Vec<usize> = c.points().iter().map(|p| p.0).collect();
        vs.sort_unstable();
        vs.dedup();
        for v in vs {
            self.by_vertex[v].push(k);
        }
        self.active.push(c);
        self.multipliers.push(0.0);
        true
    }

    fn max_violation(&self, sol: &SdpSolution) -> f64 {
        self.active.iter().map(|c| c.violation(sol)).fold(0.0, f64::max)
    }
}

/// Approximately solves the relaxation by an augmented Lagrangian over the
/// triangle inequalities. Each block step maximizes a minorizer of the
/// negated Lagrangian, so sweeps never increase it. Always returns the last
/// point, with `converged` and the residuals telling how far it is from done.
pub fn solve_ug_sdp(inst: &UgInstance, cfg: &SolverConfig) -> Result<SdpSolution> {
    cfg.validate()?;
    let labels = inst.labels();
    if labels < 2 {
        return Err(Error::Precondition("the relaxation needs at least two labels".into()));
    }
    let rank = cfg.rank.unwrap_or(labels);
    if rank < labels {
        return Err(Error::invalid(format!("rank {rank} is below the label count {labels}")));
    }
    let n = inst.vertex_count();
    let g = inst.graph();
    let mut init = rng_for(cfg.seed, &[1]);
    let mut sol = SdpSolution {
        labels,
        rank,
        vectors: (0..n).map(|_| random_start(rank, labels, &mut init)).collect(),
        objective: 0.0,
        residuals: ResidualReport::default(),
        sweeps: 0,
        converged: false,
    };
    let total = g.total_weight();
    if total <= 0.0 {
        sol.residuals = residuals(inst, &sol, cfg.constraint_tolerance, cfg.triangle_samples, cfg.seed);
        sol.converged = true;
        return Ok(sol);
    }
    let backward: Vec<Vec<usize>> = (0..g.edges().len()).map(|e| inst.inverse_constraint(e).to_vec()).collect();
    // Penalties are scaled to a typical vertex's share of the objective.
    let mut pen = Penalties::new(n, cfg.penalty * 4.0 / n as f64);
    let mut sweep_converged = false;
    let mut constraints_settled = false;
    let mut last_violation = f64::INFINITY;
    let size = rank * labels;
    let mut grad = vec![0.0; size];
    let mut step_scale = vec![1.0 / 64.0; n];
    for epoch in 0..=cfg.max_epochs {
        sweep_converged = false;
        for _ in 0..cfg.max_sweeps {
            sol.sweeps += 1;
            let mut gain = 0.0;
            for u in 0..n {
                let mut lin = vec![0.0; size];
                let mut loops: Vec<(usize, f64)> = Vec::new();
                for &id in g.incident(u) {
                    let e = &g.edges()[id];
                    let c = 4.0 * e.w / total;
                    if e.is_loop() {
                        loops.push((id, c / 2.0));
                    } else if e.u == u {
                        let pi = inst.constraint(id);
                        for i in 0..labels {
                            axpy(&mut lin[i * rank..(i + 1) * rank], c, sol.vector(e.v, pi[i]));
                        }
                    } else {
                        for j in 0..labels {
                            axpy(&mut lin[j * rank..(j + 1) * rank], c, sol.vector(e.u, backward[id][j]));
                        }
                    }
                }
                // The part of the Lagrangian that depends on this vertex.
                let block_value = |sol: &SdpSolution| -> f64 {
                    let mut val = -dot(&sol.vectors[u], &lin);
                    for &(id, c) in &loops {
                        let pi = inst.constraint(id);
                        val -= c * (0..labels).map(|i| dot(sol.vector(u, i), sol.vector(u, pi[i]))).sum::<f64>();
                    }
                    for &k in &pen.by_vertex[u] {
                        val += augmented(pen.active[k].violation(sol), pen.multipliers[k], pen.rho);
                    }
                    val
                };
                let mut b = lin.clone();
                let mut curvature = 0.0;
                for &(id, c) in &loops {
                    let pi = inst.constraint(id);
                    for i in 0..labels {
                        let col = &mut b[i * rank..(i + 1) * rank];
                        axpy(col, c, sol.vector(u, pi[i]));
                        axpy(col, c, sol.vector(u, backward[id][i]));
                    }
                    curvature += 2.0 * c;
                }
                for &k in &pen.by_vertex[u] {
                    let c = &pen.active[k];
                    let m = (pen.rho * c.violation(&sol) + pen.multipliers[k]).max(0.0);
                    grad.iter_mut().for_each(|x| *x = 0.0);
                    c.add_gradient(&sol, u, -1.0, &mut grad);
                    axpy(&mut b, -m, &grad);
                    curvature += pen.rho * dot(&grad, &grad) + 2.0 * m;
                }
                // Try a fraction of the worst-case curvature first and back off
                // towards the full bound, which always decreases the block.
                let before = block_value(&sol);
                let current = sol.vectors[u].clone();
                let mut scale = if curvature > 0.0 { step_scale[u] } else { 1.0 };
                loop {
                    let mut trial = b.clone();
                    axpy(&mut trial, scale * curvature, &current);
                    let Some(x) = block_update(&current, &trial, rank, labels) else { break };
                    sol.vectors[u] = x;
                    let after = block_value(&sol);
                    if after < before {
                        gain += before - after;
                        step_scale[u] = (scale * 0.5).max(1e-6);
                        break;
                    }
                    sol.vectors[u] = current.clone();
                    if scale >= 1.0 {
                        break;
                    }
                    scale = (scale * 4.0).min(1.0);
                    step_scale[u] = scale;
                }
            }
            if gain < cfg.sweep_tolerance {
                sweep_converged = true;
                break;
            }
        }
        for (k, c) in pen.active.iter().enumerate() {
            pen.multipliers[k] = (pen.multipliers[k] + pen.rho * c.violation(&sol)).max(0.0);
        }
        if epoch == cfg.max_epochs {
            break;
        }
        let mut rng = rng_for(cfg.seed, &[2, epoch as u64]);
        let (candidates, _) = triangle_candidates(n, labels, cfg.triangle_samples, &mut rng);
        let mut added = 0;
        for c in candidates {
            if c.violation(&sol) > cfg.constraint_tolerance && pen.add(c) {
                added += 1;
            }
        }
        let violation = pen.max_violation(&sol);
        if added == 0 && violation <= cfg.constraint_tolerance {
            constraints_settled = true;
            break;
        }
        if violation > 0.25 * last_violation {
            pen.rho *= cfg.penalty_growth;
        }
        last_violation = violation;
    }
    sol.objective = sdp_objective(inst, &sol);
    sol.residuals = residuals(inst, &sol, cfg.constraint_tolerance, cfg.triangle_samples, cfg.seed);
    sol.converged = sweep_converged && (constraints_settled || sol.residuals.triangle_violations == 0);
    Ok(sol)
}

/// Inner products of the normalized vectors, computed from the originals:
/// `<u~_i, v~_j> = <u_i, v_j> / max(|u_i|^2, |v_j|^2)`, zero when both vanish.
pub struct NormalizedVectors<'a> {
    sol: &'a SdpSolution,
    norms: Vec<Vec<f64>>,
}

pub fn normalize_vectors(sol: &SdpSolution) -> NormalizedVectors<'_> {
    let norms = (0..sol.vectors.len()).map(|v| (0..sol.labels).map(|i| sol.norm2(v, i)).collect()).collect();
    NormalizedVectors { sol, norms }
}

impl NormalizedVectors<'_> {
    pub fn norm2(&self, v: usize, i: usize) -> f64 {
        self.norms[v][i]
    }

    pub fn inner(&self, u: usize, i: usize, v: usize, j: usize) -> f64 {
        let m = self.norms[u][i].max(self.norms[v][j]);
        if m <= 0.0 {
            0.0
        } else {
            dot(self.sol.vector(u, i), self.sol.vector(v, j)) / m
        }
    }

    /// `|u~_i - v~_j|^2`.
    pub fn distance2(&self, u: usize, i: usize, v: usize, j: usize) -> f64 {
        self.inner(u, i, u, i) + self.inner(v, j, v, j) - 2.0 * self.inner(u, i, v, j)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Rounding {
    pub assignment: Vec<usize>,
    pub value: f64,
    /// Attempt that produced the assignment.
    pub attempt: usize,
}

/// Label given to vertices whose candidate set is empty or ambiguous.
pub const FILL_LABEL: usize = 1;

/// One draw of the rounding: seed vertex by weight, label by squared norm,
/// threshold in `(0, |u_i|^2]`, radius in `[R, 2R]`; a vertex takes the unique
/// label of its candidate set and [`FILL_LABEL`] otherwise.
fn round_once(inst: &UgInstance, nv: &NormalizedVectors, radius_base: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = inst.vertex_count();
    let labels = inst.labels();
    let fill = FILL_LABEL.min(labels - 1);
    let weights = inst.graph().weights();
    let u = match WeightedIndex::new(weights) {
        Ok(d) => d.sample(rng),
        Err(_) => rng.gen_range(0..n),
    };
    let label_weights: Vec<f64> = (0..labels).map(|i| nv.norm2(u, i)).collect();
    let i = match WeightedIndex::new(&label_weights) {
        Ok(d) => d.sample(rng),
        Err(_) => return vec![fill; n],
    };
    let t = nv.norm2(u, i) * (1.0 - rng.gen::<f64>());
    let r = radius_base * (1.0 + rng.gen::<f64>());
    (0..n)
        .map(|v| {
            let mut chosen = None;
            for p in 0..labels {
                if nv.norm2(v, p) >= t && nv.norm2(v, p) > 0.0 && nv.distance2(u, i, v, p) <= r {
                    if chosen.is_some() {
                        return fill;
                    }
                    chosen = Some(p);
                }
            }
            chosen.unwrap_or(fill)
        })
        .collect()
}

/// Best of `cfg.retries` rounding draws by instance value; the first best wins ties.
pub fn round_sdp(inst: &UgInstance, sol: &SdpSolution, cfg: &SolverConfig, seed: u64) -> Rounding {
    let nv = normalize_vectors(sol);
    let mut best: Option<Rounding> = None;
    for attempt in 0..cfg.retries.max(1) {
        let mut rng = rng_for(seed, &[3, attempt as u64]);
        let a = round_once(inst, &nv, cfg.rounding_radius, &mut rng);
        let value = inst.value(&a);
        if best.as_ref().is_none_or(|b| value > b.value + 1e-12) {
            best = Some(Rounding { assignment: a, value, attempt });
        }
    }
    best.expect("at least one attempt")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UgSolution {
    pub assignment: Vec<usize>,
    pub value: f64,
    pub objective: f64,
    pub residuals: ResidualReport,
    pub converged: bool,
}

/// Relaxation followed by rounding. One label needs neither.
pub fn solve_ug(inst: &UgInstance, cfg: &SolverConfig) -> Result<UgSolution> {
    if inst.labels() == 1 {
        let a = vec![0; inst.vertex_count()];
        return Ok(UgSolution { value: inst.value(&a), assignment: a, objective: 0.0, residuals: ResidualReport::default(), converged: true });
    }
    let sol = solve_ug_sdp(inst, cfg)?;
    let r = round_sdp(inst, &sol, cfg, cfg.seed);
    Ok(UgSolution { assignment: r.assignment, value: r.value, objective: sol.objective, residuals: sol.residuals, converged: sol.converged })
}

/// Removes assignment `a` from every constraint. Returns the instance on one
/// label fewer and, per vertex, the old label of each new label.
pub fn remove_assignment(inst: &UgInstance, a: &[usize]) -> Result<(UgInstance, Vec<Vec<usize>>)> {
    let labels = inst.labels();
    if labels < 2 {
        return Err(Error::Precondition("cannot remove an assignment from a single label".into()));
    }
    if a.len() != inst.vertex_count() || a.iter().any(|&x| x >= labels) {
        return Err(Error::invalid("assignment does not match the instance"));
    }
    let last = labels - 1;
    // Per vertex, the transposition sending a(v) to the last label.
    let swap = |v: usize, x: usize| {
        if x == a[v] {
            last
        } else if x == last {
            a[v]
        } else {
            x
        }
    };
    let mut edges = Vec::with_capacity(inst.graph().edges().len());
    for (id, e) in inst.graph().edges().iter().enumerate() {
        let pi = inst.constraint(id);
        let mut conj: Vec<usize> = (0..labels).map(|x| swap(e.v, pi[swap(e.u, x)])).collect();
        let target = conj[last];
        if target != last {
            let source = conj.iter().position(|&y| y == last).expect("permutation");
            conj[source] = target;
        }
        conj.truncate(last);
        edges.push((e.u, e.v, e.w, conj));
    }
    let reduced = UgInstance::new(inst.vertex_count(), last, edges)?;
    let maps = (0..inst.vertex_count()).map(|v| (0..last).map(|x| swap(v, x)).collect()).collect();
    Ok((reduced, maps))
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ListSolution {
    /// Assignments in the labels of the input instance.
    pub assignments: Vec<Vec<usize>>,
    /// Value of each assignment on the input instance.
    pub values: Vec<f64>,
    /// Value each round achieved on its reduced instance.
    pub round_values: Vec<f64>,
}

/// Solves, records, removes the found assignment and repeats, at most once
/// per label, stopping when a round's value falls below the floor.
pub fn list_solve_ug(inst: &UgInstance, cfg: &SolverConfig) -> Result<ListSolution> {
    let n = inst.vertex_count();
    let mut current = inst.clone();
    let mut maps: Vec<Vec<usize>> = (0..n).map(|_| (0..inst.labels()).collect()).collect();
    let mut out = ListSolution::default();
    let rounds = cfg.max_rounds.map_or(inst.labels(), |r| r.min(inst.labels()));
    for round in 0..rounds {
        let round_cfg = SolverConfig { seed: crate::rng::derive_seed(cfg.seed, &[round as u64]), ..cfg.clone() };
        let found = solve_ug(&current, &round_cfg)?;
        if found.value < cfg.value_floor {
            break;
        }
        let original: Vec<usize> = (0..n).map(|v| maps[v][found.assignment[v]]).collect();
        out.values.push(inst.value(&original));
        out.round_values.push(found.value);
        out.assignments.push(original);
        if current.labels() == 1 {
            break;
        }
        let (reduced, step) = remove_assignment(&current, &found.assignment)?;
        for v in 0..n {
            maps[v] = step[v].iter().map(|&x| maps[v][x]).collect();
        }
        current = reduced;
    }
    Ok(out)
}

pub const BRUTE_FORCE_BUDGET: f64 = 1e7;

/// Exhaustive search in lexicographic order (vertex 0 most significant); the
/// first assignment of maximum value wins.
pub fn brute_force_ug(inst: &UgInstance) -> Result<(Vec<usize>, f64)> {
    let n = inst.vertex_count();
    let labels = inst.labels();
    if (labels as f64).powi(n as i32) > BRUTE_FORCE_BUDGET {
        return Err(Error::Budget(format!("{labels}^{n} assignments exceed the brute-force budget")));
    }
    let mut a = vec![0; n];
    let mut best = (a.clone(), inst.value(&a));
    loop {
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(best);
            }
            k -= 1;
            a[k] += 1;
            if a[k] < labels {
                break;
            }
            a[k] = 0;
        }
        let value = inst.value(&a);
        if value > best.1 + 1e-12 {
            best = (a.clone(), value);
        }
    }
}

/// Measure of the vertices on which two assignments agree.
pub fn agreement_fraction(a: &[usize], b: &[usize], g: &WeightedGraph) -> f64 {
    (0..g.vertex_count()).filter(|&v| a[v] == b[v]).map(|v| g.vertex_measure(v)).sum()
}
