//! Double samplers: a top layer `V2` of `m2`-sets with a law `W`, a middle
//! layer `V1` of `m1`-sets (a multiset of copies), and the coordinates
//! `V0 = [n]`. The laws on `V1` and `V0` are those of the path
//! `T ~ W`, `S` a uniform child copy of `T`, `x` a uniform element of `S`.
//! All three laws are kept as exact rationals next to their float images.

use std::collections::HashMap;

use itertools::Itertools;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{bipartite_operator_norm, two_step_walk, EigenConfig, WeightedBipartiteGraph, WeightedGraph};

pub type Rational = BigRational;

/// Parses `"p/q"`, an integer, or a plain decimal such as `"0.25"`.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::invalid(format!("not an exact rational: {text:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches('-'), frac);
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let p: BigInt = digits.parse().map_err(|_| bad())?;
        let q = num_traits::pow(BigInt::from(10), frac.len());
        let r = Rational::new(p, q);
        return Ok(if negative { -r } else { r });
    }
    let p: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(p))
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

#[derive(Clone, Debug)]
pub struct DoubleSampler {
    n: usize,
    m1: usize,
    m2: usize,
    v1: Vec<Vec<usize>>,
    v2: Vec<Vec<usize>>,
    law2_exact: Vec<Rational>,
    law1_exact: Vec<Rational>,
    law0_exact: Vec<Rational>,
    law2: Vec<f64>,
    law1: Vec<f64>,
    law0: Vec<f64>,
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
}

fn check_set(set: &[usize], size: usize, n: usize, what: &str) -> Result<()> {
    if set.len() != size {
        return Err(Error::invalid(format!("{what} set {set:?} should have {size} elements")));
    }
    if set.windows(2).any(|w| w[0] >= w[1]) || set.iter().any(|&x| x >= n) {
        return Err(Error::invalid(format!("{what} set {set:?} must be strictly increasing below {n}")));
    }
    Ok(())
}

impl DoubleSampler {
    /// Builds a sampler from explicit layers. `law2 = None` means uniform on `V2`.
    pub fn new(
        n: usize,
        m1: usize,
        m2: usize,
        v1: Vec<Vec<usize>>,
        v2: Vec<Vec<usize>>,
        law2: Option<Vec<Rational>>,
    ) -> Result<Self> {
        if !(1 <= m1 && m1 < m2 && m2 <= n) {
            return Err(Error::invalid(format!("need 1 <= m1 < m2 <= n, got m1={m1} m2={m2} n={n}")));
        }
        if v1.is_empty() || v2.is_empty() {
            return Err(Error::invalid("sampler layers must be non-empty"));
        }
        for s in &v1 {
            check_set(s, m1, n, "V1")?;
        }
        for t in &v2 {
            check_set(t, m2, n, "V2")?;
        }
        let law2_exact = match law2 {
            None => vec![Rational::new(BigInt::one(), BigInt::from(v2.len())); v2.len()],
            Some(w) => {
                if w.len() != v2.len() {
                    return Err(Error::invalid("law on V2 has the wrong length"));
                }
                if w.iter().any(|p| p.is_negative()) {
                    return Err(Error::invalid("law on V2 has a negative atom"));
                }
                let total: Rational = w.iter().cloned().sum();
                if !total.is_one() {
                    return Err(Error::invalid(format!("law on V2 sums to {total}, not 1")));
                }
                w
            }
        };

        let mut copies: HashMap<&[usize], Vec<usize>> = HashMap::new();
        for (i, s) in v1.iter().enumerate() {
            copies.entry(s.as_slice()).or_default().push(i);
        }
        let by_subsets = binomial(m2, m1) <= v1.len() as u128;
        let children: Vec<Vec<usize>> = v2
            .iter()
            .map(|t| {
                if by_subsets {
                    t.iter()
                        .copied()
                        .combinations(m1)
                        .flat_map(|s| copies.get(s.as_slice()).cloned().unwrap_or_default())
                        .sorted()
                        .collect()
                } else {
                    (0..v1.len()).filter(|&i| v1[i].iter().all(|x| t.binary_search(x).is_ok())).collect()
                }
            })
            .collect();
        let mut parents = vec![Vec::new(); v1.len()];
        for (t, kids) in children.iter().enumerate() {
            for &s in kids {
                parents[s].push(t);
            }
        }
        if let Some(s) = parents.iter().position(Vec::is_empty) {
            return Err(Error::invalid(format!("V1 copy {s} ({:?}) lies in no V2 set", v1[s])));
        }
        for (t, kids) in children.iter().enumerate() {
            if kids.is_empty() && law2_exact[t].is_positive() {
                return Err(Error::invalid(format!("V2 set {t} has positive law but no V1 children")));
            }
        }

        let mut law1_exact = vec![Rational::zero(); v1.len()];
        for (t, kids) in children.iter().enumerate() {
            if kids.is_empty() {
                continue;
            }
            let share = &law2_exact[t] / Rational::from_integer(BigInt::from(kids.len()));
            for &s in kids {
                law1_exact[s] += &share;
            }
        }
        let mut law0_exact = vec![Rational::zero(); n];
        let m1_r = Rational::from_integer(BigInt::from(m1));
        for (s, set) in v1.iter().enumerate() {
            let share = &law1_exact[s] / &m1_r;
            for &x in set {
                law0_exact[x] += &share;
            }
        }
        let to_f = |v: &[Rational]| v.iter().map(rational_to_f64).collect::<Vec<f64>>();
        Ok(DoubleSampler {
            n,
            m1,
            m2,
            law2: to_f(&law2_exact),
            law1: to_f(&law1_exact),
            law0: to_f(&law0_exact),
            law2_exact,
            law1_exact,
            law0_exact,
            v1,
            v2,
            children,
            parents,
        })
    }

    /// All `m1`-subsets and all `m2`-subsets of `[n]`, uniform law.
    pub fn complete(n: usize, m1: usize, m2: usize, budget: usize) -> Result<Self> {
        if !(1 < m1 && m1 < m2 && m2 <= n) {
            return Err(Error::invalid(format!("need 1 < m1 < m2 <= n, got m1={m1} m2={m2} n={n}")));
        }
        let size = binomial(n, m2).max(binomial(n, m1));
        if size > budget as u128 {
            return Err(Error::Budget(format!("complete complex needs {size} sets, budget {budget}")));
        }
        let v1 = (0..n).combinations(m1).collect();
        let v2 = (0..n).combinations(m2).collect();
        Self::new(n, m1, m2, v1, v2, None)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m1(&self) -> usize {
        self.m1
    }
    pub fn m2(&self) -> usize {
        self.m2
    }
    pub fn top_sets(&self) -> &[Vec<usize>] {
        &self.v2
    }
    pub fn middle_sets(&self) -> &[Vec<usize>] {
        &self.v1
    }
    pub fn top_law(&self) -> &[f64] {
        &self.law2
    }
    pub fn middle_law(&self) -> &[f64] {
        &self.law1
    }
    pub fn element_law(&self) -> &[f64] {
        &self.law0
    }
    pub fn top_law_exact(&self) -> &[Rational] {
        &self.law2_exact
    }
    pub fn middle_law_exact(&self) -> &[Rational] {
        &self.law1_exact
    }
    pub fn element_law_exact(&self) -> &[Rational] {
        &self.law0_exact
    }
    /// `V1` copies contained in the top set `t`, ascending.
    pub fn children(&self, t: usize) -> &[usize] {
        &self.children[t]
    }
    /// Top sets containing the copy `s`, ascending.
    pub fn parents(&self, s: usize) -> &[usize] {
        &self.parents[s]
    }

    /// Index of element `x` inside the sorted top set `t`.
    pub fn position(&self, t: usize, x: usize) -> Option<usize> {
        self.v2[t].binary_search(&x).ok()
    }

    /// Positions inside `t` of the elements of copy `s`.
    pub fn positions_of(&self, t: usize, s: usize) -> Vec<usize> {
        self.v1[s].iter().map(|&x| self.position(t, x).expect("child inside parent")).collect()
    }

    /// The law on `V0` is uniform and so is its restriction to every top set.
    pub fn is_regular(&self) -> bool {
        if self.law0_exact.iter().any(|p| p != &self.law0_exact[0]) {
            return false;
        }
        self.children.iter().enumerate().all(|(t, kids)| {
            let mut hits = vec![0usize; self.m2];
            for &s in kids {
                for p in self.positions_of(t, s) {
                    hits[p] += 1;
                }
            }
            hits.iter().all(|&h| h == hits[0])
        })
    }

    /// Inclusion graph of `t`: child copies on the left, positions of `t`
    /// on the right.
    pub fn local_graph(&self, t: usize) -> Result<WeightedBipartiteGraph> {
        let kids = &self.children[t];
        if kids.is_empty() {
            return Err(Error::invalid(format!("top set {t} has no children")));
        }
        let w = 1.0 / (kids.len() * self.m1) as f64;
        let edges = kids.iter().enumerate().flat_map(|(i, &s)| self.positions_of(t, s).into_iter().map(move |p| (i, p, w))).collect();
        WeightedBipartiteGraph::new(kids.len(), self.m2, edges)
    }

    /// `V2`-`V1` inclusion graph weighted by the path law.
    pub fn top_middle_graph(&self) -> Result<WeightedBipartiteGraph> {
        let mut edges = Vec::new();
        for (t, kids) in self.children.iter().enumerate() {
            for &s in kids {
                edges.push((t, s, self.law2[t] / kids.len() as f64));
            }
        }
        WeightedBipartiteGraph::new(self.v2.len(), self.v1.len(), edges)
    }

    /// `V1`-`V0` inclusion graph weighted by the path law.
    pub fn middle_element_graph(&self) -> Result<WeightedBipartiteGraph> {
        let mut edges = Vec::new();
        for (s, set) in self.v1.iter().enumerate() {
            for &x in set {
                edges.push((s, x, self.law1[s] / self.m1 as f64));
            }
        }
        WeightedBipartiteGraph::new(self.v1.len(), self.n, edges)
    }

    /// Two-step walk `T -> S -> T'` on the top layer.
    pub fn top_walk(&self) -> Result<WeightedGraph> {
        two_step_walk(&self.top_middle_graph()?, &self.law2)
    }

    pub fn sample_path<R: Rng>(&self, rng: &mut R) -> (usize, usize, usize) {
        let top = WeightedIndex::new(&self.law2).expect("positive law").sample(rng);
        let kids = &self.children[top];
        let s = kids[rng.gen_range(0..kids.len())];
        let x = self.v1[s][rng.gen_range(0..self.m1)];
        (top, s, x)
    }

    /// Law of the top set conditioned on the path ending at element `x`,
    /// restricted to `allowed` when given. Pairs `(t, probability)`.
    pub fn top_given_element(&self, x: usize, allowed: Option<&[bool]>) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for (t, set) in self.v2.iter().enumerate() {
            if set.binary_search(&x).is_err() || allowed.is_some_and(|a| !a[t]) || self.law2[t] <= 0.0 {
                continue;
            }
            let kids = &self.children[t];
            let hits = kids.iter().filter(|&&s| self.v1[s].binary_search(&x).is_ok()).count();
            if hits > 0 {
                out.push((t, self.law2[t] * hits as f64 / (kids.len() * self.m1) as f64));
            }
        }
        let total: f64 = out.iter().map(|p| p.1).sum();
        out.iter_mut().for_each(|p| p.1 /= total);
        out
    }

    /// Law of the middle copy given that both parents on the walk are
    /// `a` and `b`: proportional to `law1(S) P(a|S) P(b|S)` over common children.
    pub fn middle_given_tops(&self, a: usize, b: usize) -> Vec<(usize, f64)> {
        let (ka, kb) = (&self.children[a], &self.children[b]);
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < ka.len() && j < kb.len() {
            match ka[i].cmp(&kb[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let s = ka[i];
                    if self.law1[s] > 0.0 {
                        out.push((s, self.law2[a] / ka.len() as f64 * self.law2[b] / kb.len() as f64 / self.law1[s]));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        let total: f64 = out.iter().map(|p| p.1).sum();
        out.iter_mut().for_each(|p| p.1 /= total);
        out
    }

    /// Spectral quantities of the three layers.
    pub fn spectral_profile(&self, cfg: &EigenConfig) -> Result<SpectralProfile> {
        let top_middle = bipartite_operator_norm(&self.top_middle_graph()?, cfg)?.lambda;
        let middle_element = bipartite_operator_norm(&self.middle_element_graph()?, cfg)?.lambda;
        let mut local_max: f64 = 0.0;
        for t in 0..self.v2.len() {
            if self.law2[t] > 0.0 {
                local_max = local_max.max(bipartite_operator_norm(&self.local_graph(t)?, cfg)?.lambda);
            }
        }
        Ok(SpectralProfile { top_middle, middle_element, local_max })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralProfile {
    pub top_middle: f64,
    pub middle_element: f64,
    pub local_max: f64,
}

/// `delta` certified for accuracy `alpha` by a bipartite graph of second
/// singular value `lambda`.
pub fn spectral_sampler_bound(lambda: f64, alpha: f64) -> f64 {
    lambda * lambda / (alpha * alpha)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SamplerReport {
    pub alpha: f64,
    pub delta: f64,
    /// For each test function, the left mass whose local average misses the
    /// global average by at least `alpha`.
    pub violations: Vec<f64>,
    pub max_violation: f64,
    pub passed: bool,
}

/// Probability, over `l ~ left_law`, that the average of `f` over the
/// neighbours of `l` is at least `alpha` away from its global average.
pub fn sampler_violation(g: &WeightedBipartiteGraph, left_law: &[f64], f: &[f64], alpha: f64) -> f64 {
    let mut local = vec![0.0; g.left_count()];
    for &(l, r, w) in g.edges() {
        local[l] += w * f[r];
    }
    for (l, v) in local.iter_mut().enumerate() {
        let d = g.left_weight(l);
        if d > 0.0 {
            *v /= d;
        }
    }
    let mass: f64 = left_law.iter().sum();
    let global: f64 = left_law.iter().zip(&local).map(|(p, v)| p * v).sum::<f64>() / mass;
    left_law
        .iter()
        .zip(&local)
        .enumerate()
        .filter(|(l, (p, v))| **p > 0.0 && g.left_weight(*l) > 0.0 && (*v - global).abs() >= alpha - 1e-12)
        .map(|(_, (p, _))| p / mass)
        .sum()
}

pub fn verify_sampler(g: &WeightedBipartiteGraph, left_law: &[f64], alpha: f64, delta: f64, fns: &[Vec<f64>]) -> Result<SamplerReport> {
    if left_law.len() != g.left_count() {
        return Err(Error::invalid("left law length differs from left side"));
    }
    if fns.iter().any(|f| f.len() != g.right_count() || f.iter().any(|x| !(0.0..=1.0).contains(x))) {
        return Err(Error::invalid("test functions must map the right side into [0, 1]"));
    }
    let violations: Vec<f64> = fns.iter().map(|f| sampler_violation(g, left_law, f, alpha)).collect();
    let max_violation = violations.iter().copied().fold(0.0, f64::max);
    Ok(SamplerReport { alpha, delta, passed: max_violation <= delta + 1e-12, violations, max_violation })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flatness {
    /// Largest atom in units of `1/resolution`.
    pub d: BigInt,
    pub resolution: BigInt,
}

/// Smallest `D` such that every atom lies in `{1/R, ..., D/R}` for some `R`.
pub fn flatness(dist: &[Rational]) -> Result<Flatness> {
    if dist.is_empty() {
        return Err(Error::invalid("empty distribution"));
    }
    if dist.iter().any(|p| !p.is_positive()) {
        return Err(Error::invalid("flat distributions have positive atoms only"));
    }
    let total: Rational = dist.iter().cloned().sum();
    if !total.is_one() {
        return Err(Error::invalid(format!("distribution sums to {total}")));
    }
    let resolution = dist.iter().fold(BigInt::one(), |acc, p| acc.lcm(p.denom()));
    let d = dist
        .iter()
        .map(|p| (p * Rational::from_integer(resolution.clone())).to_integer())
        .max()
        .expect("non-empty");
    Ok(Flatness { d, resolution })
}
