//! Unique-games instances, and the instance built from local lists.
//!
//! Vertices are top sets; edges are those of the two-step walk. The
//! permutation on an edge `(T1, T2)` matches the entries of the two local
//! lists that agree on one sampled common child `S`.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::bits::BitWord;
use crate::error::{Error, Result};
use crate::graph::{induced_subgraph, WeightedGraph};
use crate::local_lists::{local_distance, restrict_to_top, LocalList, LocalWord};
use crate::rng::rng_for;
use crate::sampler::DoubleSampler;

const RADIUS_SLACK: f64 = 1e-12;

pub fn is_permutation(p: &[usize], labels: usize) -> bool {
    if p.len() != labels {
        return false;
    }
    let mut seen = vec![false; labels];
    p.iter().all(|&x| x < labels && !std::mem::replace(&mut seen[x], true))
}

pub fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x] = i;
    }
    inv
}

/// Constraint `pi` on edge `(u, v)` (with `u <= v`) is satisfied by `a` when
/// `pi[a[u]] == a[v]`.
#[derive(Clone, Debug)]
pub struct UgInstance {
    graph: WeightedGraph,
    labels: usize,
    forward: Vec<Vec<usize>>,
    backward: Vec<Vec<usize>>,
}

impl UgInstance {
    /// Edges may be given in either orientation; a reversed edge stores the
    /// inverse permutation.
    pub fn new(vertex_count: usize, labels: usize, edges: Vec<(usize, usize, f64, Vec<usize>)>) -> Result<Self> {
        if labels == 0 {
            return Err(Error::invalid("need at least one label"));
        }
        let mut forward = Vec::with_capacity(edges.len());
        let mut plain = Vec::with_capacity(edges.len());
        for (u, v, w, pi) in edges {
            if !is_permutation(&pi, labels) {
                return Err(Error::invalid(format!("edge ({u},{v}) has an invalid permutation {pi:?}")));
            }
            if u <= v {
                forward.push(pi);
                plain.push((u, v, w));
            } else {
                forward.push(invert(&pi));
                plain.push((v, u, w));
            }
        }
        let graph = WeightedGraph::new(vertex_count, plain)?;
        let backward = forward.iter().map(|p| invert(p)).collect();
        Ok(UgInstance { graph, labels, forward, backward })
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    /// Permutation of edge `e` from labels of `e.u` to labels of `e.v`.
    pub fn constraint(&self, e: usize) -> &[usize] {
        &self.forward[e]
    }

    pub fn inverse_constraint(&self, e: usize) -> &[usize] {
        &self.backward[e]
    }

    pub fn satisfied(&self, e: usize, a: &[usize]) -> bool {
        let edge = &self.graph.edges()[e];
        self.forward[e][a[edge.u]] == a[edge.v]
    }

    /// Edge measure of the satisfied constraints; an instance without edge
    /// weight has value one.
    pub fn value(&self, a: &[usize]) -> f64 {
        assert_eq!(a.len(), self.vertex_count(), "assignment length");
        let total = self.graph.total_weight();
        if total <= 0.0 {
            return 1.0;
        }
        let good: f64 = (0..self.forward.len())
            .filter(|&e| self.satisfied(e, a))
            .map(|e| self.graph.edges()[e].oriented_weight())
            .sum();
        good / total
    }

    /// Sub-instance on `subset` (sorted, deduplicated) and the original ids.
    pub fn induced(&self, subset: &[usize]) -> Result<(UgInstance, Vec<usize>)> {
        let sub = induced_subgraph(&self.graph, subset)?;
        let mut local = vec![usize::MAX; self.vertex_count()];
        for (i, &v) in sub.vertices.iter().enumerate() {
            local[v] = i;
        }
        let edges = self
            .graph
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| local[e.u] != usize::MAX && local[e.v] != usize::MAX)
            .map(|(id, e)| (local[e.u], local[e.v], e.w, self.forward[id].clone()))
            .collect();
        Ok((UgInstance::new(sub.vertices.len(), self.labels, edges)?, sub.vertices))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadiusGroup {
    pub ladder: usize,
    pub radius: f64,
    pub vertices: Vec<usize>,
    pub measure: f64,
}

/// Top sets grouped by ladder index, in increasing order of index.
pub fn radius_partition(lists: &[LocalList], law: &[f64]) -> Vec<RadiusGroup> {
    let mut groups: BTreeMap<usize, RadiusGroup> = BTreeMap::new();
    for (t, list) in lists.iter().enumerate() {
        let g = groups.entry(list.ladder).or_insert_with(|| RadiusGroup {
            ladder: list.ladder,
            radius: list.radius,
            vertices: Vec::new(),
            measure: 0.0,
        });
        g.vertices.push(t);
        g.measure += law[t];
    }
    groups.into_values().collect()
}

#[derive(Clone, Debug)]
pub struct ConstraintGraph {
    pub instance: UgInstance,
    /// Each top set's list padded to the label count.
    pub words: Vec<Vec<LocalWord>>,
    /// Number of genuine (non-padding) entries per top set.
    pub genuine: Vec<usize>,
    pub radii: Vec<f64>,
    pub groups: Vec<RadiusGroup>,
    /// Top sets whose padding could not keep the radius separation.
    pub padding_failures: Vec<usize>,
}

/// Pads with the lexicographically first words at distance at least `radius`
/// from everything already listed; falls back to any unused word.
fn pad(words: &mut Vec<LocalWord>, target: usize, radius: f64, width: usize) -> Result<bool> {
    if (1usize << width) < target {
        return Err(Error::invalid(format!("cannot fit {target} labels into words of width {width}")));
    }
    let mut separated = true;
    for candidate in 0..(1 as LocalWord) << width {
        if words.len() >= target {
            break;
        }
        if words.iter().all(|&w| local_distance(w, candidate, width) >= radius - RADIUS_SLACK) {
            words.push(candidate);
        }
    }
    for candidate in 0..(1 as LocalWord) << width {
        if words.len() >= target {
            break;
        }
        if !words.contains(&candidate) {
            words.push(candidate);
            separated = false;
        }
    }
    Ok(separated)
}

/// Matches list entries of `a` to those of `b` on the positions of one child:
/// each entry of `a`, in order, takes the first free entry of `b` within half
/// the radius on those positions; leftovers are paired in ascending order.
pub fn match_lists(a: &[LocalWord], a_positions: &[usize], b: &[LocalWord], b_positions: &[usize], width: usize, half_radius: f64) -> Vec<usize> {
    let project = |w: LocalWord, positions: &[usize]| -> u32 {
        positions.iter().enumerate().fold(0, |acc, (k, &p)| acc | ((w >> (width - 1 - p)) & 1) << k)
    };
    let size = positions_len(a_positions);
    let pa: Vec<u32> = a.iter().map(|&w| project(w, a_positions)).collect();
    let pb: Vec<u32> = b.iter().map(|&w| project(w, b_positions)).collect();
    let labels = a.len();
    let mut pi = vec![usize::MAX; labels];
    let mut used = vec![false; labels];
    for i in 0..labels {
        if let Some(j) = (0..labels).find(|&j| !used[j] && (pa[i] ^ pb[j]).count_ones() as f64 / size <= half_radius + RADIUS_SLACK) {
            pi[i] = j;
            used[j] = true;
        }
    }
    let mut free = (0..labels).filter(|&j| !used[j]);
    for p in pi.iter_mut().filter(|p| **p == usize::MAX) {
        *p = free.next().expect("as many free targets as unmatched sources");
    }
    pi
}

fn positions_len(p: &[usize]) -> f64 {
    p.len() as f64
}

/// Builds the unique-games instance on the two-step walk of `ds`. With
/// `labels = None` the label count is the longest list (at least one).
pub fn build_constraint_graph(ds: &DoubleSampler, lists: &[LocalList], labels: Option<usize>, seed: u64) -> Result<ConstraintGraph> {
    if lists.len() != ds.top_sets().len() {
        return Err(Error::invalid("one local list per top set is required"));
    }
    let longest = lists.iter().map(|l| l.entries.len()).max().unwrap_or(0);
    let labels = labels.unwrap_or(longest.max(1));
    if longest > labels {
        return Err(Error::invalid(format!("a local list has {longest} entries but only {labels} labels")));
    }
    let width = ds.m2();
    let mut words = Vec::with_capacity(lists.len());
    let mut padding_failures = Vec::new();
    for list in lists {
        let mut w = list.words();
        if !pad(&mut w, labels, list.radius, width)? {
            padding_failures.push(list.top);
        }
        words.push(w);
    }
    let walk = ds.top_walk()?;
    let mut edges = Vec::with_capacity(walk.edges().len());
    for (id, e) in walk.edges().iter().enumerate() {
        let choices = ds.middle_given_tops(e.u, e.v);
        if choices.is_empty() {
            return Err(Error::Stage(format!("walk edge ({}, {}) has no common child", e.u, e.v)));
        }
        let mut rng = rng_for(seed, &[id as u64]);
        let pick = WeightedIndex::new(choices.iter().map(|c| c.1)).expect("positive weights").sample(&mut rng);
        let s = choices[pick].0;
        let pi = match_lists(
            &words[e.u],
            &ds.positions_of(e.u, s),
            &words[e.v],
            &ds.positions_of(e.v, s),
            width,
            lists[e.u].radius / 2.0,
        );
        edges.push((e.u, e.v, e.w, pi));
    }
    let instance = UgInstance::new(ds.top_sets().len(), labels, edges)?;
    Ok(ConstraintGraph {
        instance,
        words,
        genuine: lists.iter().map(|l| l.entries.len()).collect(),
        radii: lists.iter().map(|l| l.radius).collect(),
        groups: radius_partition(lists, ds.top_law()),
        padding_failures,
    })
}

/// Per top set, the index of the genuine entry nearest `g|T` (lowest index on ties).
pub fn nearest_entries(cg: &ConstraintGraph, ds: &DoubleSampler, g: &BitWord) -> Vec<Option<usize>> {
    (0..cg.words.len())
        .map(|t| {
            let target = restrict_to_top(ds, t, g);
            (0..cg.genuine[t]).min_by(|&i, &j| {
                local_distance(cg.words[t][i], target, ds.m2()).total_cmp(&local_distance(cg.words[t][j], target, ds.m2())).then(i.cmp(&j))
            })
        })
        .collect()
}

/// For every radius group, the edge measure (within the group) of edges
/// whose nearest entries to `g` are both close and matched to each other.
pub fn correct_edge_fraction(cg: &ConstraintGraph, ds: &DoubleSampler, g: &BitWord) -> BTreeMap<usize, f64> {
    let nearest = nearest_entries(cg, ds, g);
    let graph = cg.instance.graph();
    let mut ladder_of = vec![usize::MAX; graph.vertex_count()];
    for grp in &cg.groups {
        for &v in &grp.vertices {
            ladder_of[v] = grp.ladder;
        }
    }
    let mut out = BTreeMap::new();
    for grp in &cg.groups {
        let (mut good, mut all) = (0.0, 0.0);
        for (id, e) in graph.edges().iter().enumerate() {
            if ladder_of[e.u] != grp.ladder || ladder_of[e.v] != grp.ladder {
                continue;
            }
            all += e.oriented_weight();
            let (Some(i), Some(j)) = (nearest[e.u], nearest[e.v]) else { continue };
            let limit = cg.radii[e.u] / 9.0 + RADIUS_SLACK;
            let close = |t: usize, k: usize| local_distance(cg.words[t][k], restrict_to_top(ds, t, g), ds.m2()) <= limit;
            if close(e.u, i) && close(e.v, j) && cg.instance.constraint(id)[i] == j {
                good += e.oriented_weight();
            }
        }
        if all > 0.0 {
            out.insert(grp.ladder, good / all);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::encode;
    use crate::local_lists::{decode_all, ListConfig};
    use crate::rng::rng_for;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn orientation_inverts_permutation() {
        let inst = UgInstance::new(2, 3, vec![(1, 0, 1.0, vec![1, 2, 0])]).unwrap();
        assert_eq!(inst.constraint(0), &[2, 0, 1]);
        assert_eq!(inst.value(&[2, 1]), 1.0);
        assert_eq!(inst.value(&[1, 1]), 0.0);
        assert!(UgInstance::new(2, 2, vec![(0, 1, 1.0, vec![0, 0])]).is_err());
    }

    #[test]
    fn matching_prefers_order_and_fills_canonically() {
        let pi = match_lists(&[0b000, 0b110, 0b111], &[0, 1], &[0b111, 0b001, 0b010], &[0, 1], 3, 0.0);
        assert_eq!(pi, vec![1, 0, 2]);
        let unmatched = match_lists(&[0b00, 0b01], &[0], &[0b10, 0b11], &[0], 2, 0.0);
        assert_eq!(unmatched, vec![0, 1]);
    }

    #[test]
    fn noiseless_lists_give_consistent_instance() {
        let ds = DoubleSampler::complete(8, 2, 4, 10_000).unwrap();
        let g: BitWord = "10011010".parse().unwrap();
        let f = encode(&ds, &g).unwrap();
        let lists = decode_all(&ds, &f, &ListConfig::new(1.0, 0.01).unwrap()).unwrap();
        let cg = build_constraint_graph(&ds, &lists, None, 3).unwrap();
        let planted: Vec<usize> = nearest_entries(&cg, &ds, &g).into_iter().map(|x| x.unwrap()).collect();
        assert!((cg.instance.value(&planted) - 1.0).abs() < 1e-12);
        for (_, frac) in correct_edge_fraction(&cg, &ds, &g) {
            assert!((frac - 1.0).abs() < 1e-12);
        }
        for (id, e) in cg.instance.graph().edges().iter().enumerate() {
            if e.is_loop() {
                assert_eq!(cg.instance.constraint(id), (0..cg.instance.labels()).collect::<Vec<_>>().as_slice());
            }
        }
    }

    #[test]
    fn padding_respects_radius_when_possible() {
        let mut w = vec![0b0000];
        assert!(pad(&mut w, 3, 0.5, 4).unwrap());
        assert_eq!(w, vec![0b0000, 0b0011, 0b0101]);
        let mut crowded = vec![0b00];
        assert!(!pad(&mut crowded, 3, 1.0, 2).unwrap());
        assert_eq!(crowded.len(), 3);
    }

    proptest! {
        #[test]
        fn matchings_are_permutations(seed in 0u64..500) {
            let mut rng = rng_for(seed, &[]);
            let width = 5;
            let labels = rng.gen_range(1..8);
            let a: Vec<LocalWord> = (0..labels).map(|_| rng.gen_range(0..32)).collect();
            let b: Vec<LocalWord> = (0..labels).map(|_| rng.gen_range(0..32)).collect();
            let pi = match_lists(&a, &[0, 2], &b, &[1, 3], width, rng.gen::<f64>());
            prop_assert!(is_permutation(&pi, labels));
        }

        #[test]
        fn induced_instance_agrees_on_subsets(seed in 0u64..200) {
            let mut rng = rng_for(seed, &[7]);
            let n = 6;
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u..n {
                    if rng.gen::<f64>() < 0.5 {
                        let mut p = vec![0, 1, 2];
                        rand::seq::SliceRandom::shuffle(p.as_mut_slice(), &mut rng);
                        edges.push((v, u, rng.gen::<f64>() + 0.1, p));
                    }
                }
            }
            prop_assume!(!edges.is_empty());
            let inst = UgInstance::new(n, 3, edges).unwrap();
            let a: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let (sub, ids) = inst.induced(&[0, 2, 3, 5]).unwrap();
            let local: Vec<usize> = ids.iter().map(|&v| a[v]).collect();
            let keep = inst.graph().membership(&ids);
            let mut good = 0.0;
            let mut all = 0.0;
            for (id, e) in inst.graph().edges().iter().enumerate() {
                if keep[e.u] && keep[e.v] {
                    all += e.oriented_weight();
                    if inst.satisfied(id, &a) { good += e.oriented_weight(); }
                }
            }
            if all > 0.0 {
                prop_assert!((sub.value(&local) - good / all).abs() < 1e-12);
            }
        }
    }
}
