//! Extraction of an expanding induced subgraph by peeling sparse cuts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{cheeger_cut, induced_subgraph, second_eigenvalue, EigenConfig, WeightedBipartiteGraph, WeightedGraph};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    pub lambda_target: f64,
    pub eigen: EigenConfig,
    /// Cap on the power iterations summed over the whole loop.
    pub max_eigen_work: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { lambda_target: 0.99, eigen: EigenConfig::default(), max_eigen_work: 5_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    /// Vertices left without weight in the current induced graph.
    Isolated,
    SweepCut,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutStep {
    pub kind: StepKind,
    /// Original ids of the removed vertices.
    pub removed: Vec<usize>,
    /// `lambda` of the graph the cut was taken in.
    pub lambda: f64,
    /// Measures inside the current induced graph.
    pub cut_measure: f64,
    pub boundary: f64,
    /// `boundary <= sqrt(2 (1 - lambda2)) * cut_measure` with the signed
    /// second eigenvalue of the sweep.
    pub bound_holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Extraction {
    pub vertices: Vec<usize>,
    pub lambda: f64,
    pub measure: f64,
    pub input_measure: f64,
    pub steps: Vec<CutStep>,
    pub eigen_iterations: usize,
}

impl Extraction {
    /// Whether the output keeps a quarter of the input measure.
    pub fn keeps_quarter(&self) -> bool {
        self.measure >= self.input_measure / 4.0 - 1e-12
    }
}

pub fn extract_expander(g: &WeightedGraph, a: &[usize], cfg: &ExtractConfig) -> Result<Extraction> {
    let mut current = a.to_vec();
    current.sort_unstable();
    current.dedup();
    if current.is_empty() {
        return Err(Error::invalid("extraction needs a nonempty vertex set"));
    }
    if let Some(&v) = current.iter().find(|&&v| v >= g.vertex_count()) {
        return Err(Error::invalid(format!("vertex {v} outside graph")));
    }
    let input_measure = g.measure(&current);
    if input_measure <= 0.0 {
        return Err(Error::Precondition("vertex set has zero measure".into()));
    }
    let mut steps = Vec::new();
    let mut work = 0;
    let lambda = loop {
        let sub = induced_subgraph(g, &current)?;
        let isolated: Vec<usize> = (0..current.len()).filter(|&i| sub.graph.weight(i) <= 0.0).map(|i| current[i]).collect();
        if !isolated.is_empty() && isolated.len() < current.len() {
            current.retain(|v| isolated.binary_search(v).is_err());
            steps.push(CutStep { kind: StepKind::Isolated, removed: isolated, lambda: f64::NAN, cut_measure: 0.0, boundary: 0.0, bound_holds: true });
            continue;
        }
        if current.len() <= 1 || isolated.len() == current.len() {
            break 0.0;
        }
        let report = second_eigenvalue(&sub.graph, &cfg.eigen)?;
        work += report.iterations;
        if work > cfg.max_eigen_work {
            return Err(Error::Budget(format!("extraction exceeded {} eigensolver iterations", cfg.max_eigen_work)));
        }
        if report.lambda < cfg.lambda_target {
            break report.lambda;
        }
        let cut = cheeger_cut(&sub.graph, &cfg.eigen)?;
        let removed: Vec<usize> = cut.vertices.iter().map(|&i| sub.vertices[i]).collect();
        let bound = (2.0 * (1.0 - cut.lambda2).max(0.0)).sqrt() * cut.measure;
        current.retain(|v| removed.binary_search(v).is_err());
        steps.push(CutStep {
            kind: StepKind::SweepCut,
            removed,
            lambda: report.lambda,
            cut_measure: cut.measure,
            boundary: cut.boundary,
            bound_holds: cut.boundary <= bound + 1e-9,
        });
    };
    Ok(Extraction { measure: g.measure(&current), vertices: current, lambda, input_measure, steps, eigen_iterations: work })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MixingBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Bounds on `Pr[T1 in A, T2 in B]` for the two-step walk over the left side
/// of an `(alpha, delta)` sampler.
pub fn sampler_mixing_bounds(gsamp: &WeightedBipartiteGraph, a: &[usize], b: &[usize], alpha: f64, delta: f64) -> Result<MixingBounds> {
    let law = gsamp.left_measure();
    let measure = |set: &[usize]| -> Result<f64> {
        set.iter().map(|&v| law.get(v).copied().ok_or_else(|| Error::invalid(format!("vertex {v} outside sampler")))).sum()
    };
    let (ma, mb) = (measure(a)?, measure(b)?);
    if ma <= delta {
        return Err(Error::Precondition(format!("mu(A) = {ma} does not exceed delta = {delta}")));
    }
    if mb <= alpha {
        return Err(Error::Precondition(format!("mu(B) = {mb} does not exceed alpha = {alpha}")));
    }
    Ok(MixingBounds { lower: (ma - delta) * (mb - alpha), upper: ma * (mb + alpha) + delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::two_step_walk;
    use crate::rng::rng_for;
    use crate::sampler::{sampler_violation, DoubleSampler};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn clique_edges(vs: &[usize], w: f64) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, &u) in vs.iter().enumerate() {
            for &v in &vs[i + 1..] {
                out.push((u, v, w));
            }
        }
        out
    }

    #[test]
    fn expander_input_is_kept() {
        let g = WeightedGraph::new(6, clique_edges(&[0, 1, 2, 3, 4, 5], 1.0)).unwrap();
        let out = extract_expander(&g, &[0, 1, 2, 3, 4, 5], &ExtractConfig::default()).unwrap();
        assert_eq!(out.vertices, vec![0, 1, 2, 3, 4, 5]);
        assert!(out.steps.is_empty());
        assert!((out.lambda - 0.2).abs() < 1e-7);
    }

    #[test]
    fn single_vertex_stops_immediately() {
        let g = WeightedGraph::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let out = extract_expander(&g, &[1], &ExtractConfig::default()).unwrap();
        assert_eq!(out.vertices, vec![1]);
        assert_eq!(out.lambda, 0.0);
        assert!(extract_expander(&g, &[], &ExtractConfig::default()).is_err());
    }

    #[test]
    fn two_cliques_keep_one() {
        let mut edges = clique_edges(&[0, 1, 2, 3], 1.0);
        edges.extend(clique_edges(&[4, 5, 6, 7], 1.0));
        edges.push((3, 4, 0.01));
        let g = WeightedGraph::new(8, edges).unwrap();
        let out = extract_expander(&g, &(0..8).collect::<Vec<_>>(), &ExtractConfig::default()).unwrap();
        assert_eq!(out.vertices, vec![4, 5, 6, 7]);
        let sub = induced_subgraph(&g, &out.vertices).unwrap();
        // K4 has normalized eigenvalues 1 and -1/3.
        assert!((out.lambda - 1.0 / 3.0).abs() < 1e-7);
        assert!((second_eigenvalue(&sub.graph, &EigenConfig::default()).unwrap().lambda - 1.0 / 3.0).abs() < 1e-7);
        let direct = (4..8).map(|v| g.weight(v)).sum::<f64>() / g.total_weight();
        assert!((out.measure - direct).abs() < 1e-12);
        assert!(out.steps.iter().all(|s| s.bound_holds));
    }

    #[test]
    fn isolated_vertices_are_dropped() {
        let mut edges = clique_edges(&[0, 1, 2], 1.0);
        edges.push((3, 4, 1.0));
        let g = WeightedGraph::new(5, edges).unwrap();
        let out = extract_expander(&g, &[0, 1, 2, 3], &ExtractConfig::default()).unwrap();
        assert_eq!(out.vertices, vec![0, 1, 2]);
        assert_eq!(out.steps[0].kind, StepKind::Isolated);
    }

    #[test]
    fn mixing_bounds_reject_small_sets() {
        let ds = DoubleSampler::complete(6, 2, 3, 10_000).unwrap();
        let gs = ds.top_middle_graph().unwrap();
        assert!(sampler_mixing_bounds(&gs, &[0], &[0, 1, 2, 3], 0.5, 0.01).is_err());
        let all: Vec<usize> = (0..ds.top_sets().len()).collect();
        let b = sampler_mixing_bounds(&gs, &all, &all, 0.01, 0.01).unwrap();
        assert!(b.lower <= 1.0 && 1.0 <= b.upper);
    }

    fn fixture() -> (DoubleSampler, WeightedBipartiteGraph, WeightedGraph) {
        let ds = DoubleSampler::complete(8, 2, 4, 100_000).unwrap();
        let gs = ds.top_middle_graph().unwrap();
        let walk = two_step_walk(&gs, ds.top_law()).unwrap();
        (ds, gs, walk)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn extraction_invariants(seed in 0u64..10_000) {
            let (ds, _, walk) = fixture();
            let mut rng = rng_for(seed, &[]);
            let mut ids: Vec<usize> = (0..ds.top_sets().len()).collect();
            ids.shuffle(&mut rng);
            let keep = rng.gen_range(ids.len() * 3 / 10..=ids.len());
            let a = &ids[..keep];
            let out = extract_expander(&walk, a, &ExtractConfig::default()).unwrap();
            prop_assert!(out.vertices.iter().all(|v| a.contains(v)));
            prop_assert!(out.lambda <= 0.99 + 1e-6);
            prop_assert!(out.keeps_quarter());
            // Trans-measure: the removed side's measure inside the current
            // graph equals its edge share in the whole graph.
            let mut alive = a.to_vec();
            alive.sort_unstable();
            for step in &out.steps {
                let inside = walk.membership(&alive);
                let removed = walk.membership(&step.removed);
                let share = walk.pair_measure(&removed, &inside) / walk.pair_measure(&inside, &inside);
                prop_assert!((share - step.cut_measure).abs() < 1e-9);
                prop_assert!(step.bound_holds);
                alive.retain(|v| !step.removed.contains(v));
            }
        }

        #[test]
        fn walk_probability_within_mixing_bounds(seed in 0u64..10_000) {
            let (ds, gs, walk) = fixture();
            let mut rng = rng_for(seed, &[1]);
            let pick = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<usize> {
                (0..ds.top_sets().len()).filter(|_| rng.gen::<f64>() < 0.5).collect()
            };
            let (a, b) = (pick(&mut rng), pick(&mut rng));
            let alpha = 0.05 + 0.2 * rng.gen::<f64>();
            // Exact delta for the one function the claim uses: Pr[T in B | S].
            let inb = walk.membership(&b);
            let mut f = vec![0.0; ds.middle_sets().len()];
            for (s, fs) in f.iter_mut().enumerate() {
                let parents = ds.parents(s);
                let (mut hit, mut all) = (0.0, 0.0);
                for &t in parents {
                    let p = ds.top_law()[t] / ds.children(t).len() as f64;
                    all += p;
                    if inb[t] { hit += p; }
                }
                *fs = if all > 0.0 { hit / all } else { 0.0 };
            }
            let delta = sampler_violation(&gs, ds.top_law(), &f, alpha);
            if let Ok(bounds) = sampler_mixing_bounds(&gs, &a, &b, alpha, delta) {
                let p = walk.pair_measure(&walk.membership(&a), &inb);
                prop_assert!(bounds.lower <= p + 1e-9, "{} > {}", bounds.lower, p);
                prop_assert!(p <= bounds.upper + 1e-9, "{} > {}", p, bounds.upper);
            }
        }
    }
}
