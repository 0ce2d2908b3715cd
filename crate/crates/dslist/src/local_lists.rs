//! Local list decoding on one top set `T`.
//!
//! `L0` holds every word on `T` that agrees with at least an `epsilon / 2`
//! fraction of the received values on the children of `T`. It is then
//! thinned by maximal independent sets at radii `rho, 10 rho, 100 rho, ...`
//! until a pass removes nothing.

use serde::{Deserialize, Serialize};

use crate::bits::BitWord;
use crate::codes::ReceivedWord;
use crate::error::{Error, Result};
use crate::sampler::DoubleSampler;

/// Largest top-set size whose `2^m2` local words are enumerated.
pub const MAX_LOCAL_WIDTH: usize = 20;

const RADIUS_SLACK: f64 = 1e-12;

/// A word on the positions of a top set; position 0 is the most significant
/// of the low `width` bits, so numeric order is lexicographic order.
pub type LocalWord = u32;

pub fn local_bit(word: LocalWord, position: usize, width: usize) -> bool {
    word >> (width - 1 - position) & 1 == 1
}

pub fn local_word_from_bits(bits: &BitWord) -> LocalWord {
    bits.0.iter().fold(0, |acc, &b| acc << 1 | b as LocalWord)
}

pub fn local_word_to_bits(word: LocalWord, width: usize) -> BitWord {
    BitWord((0..width).map(|p| local_bit(word, p, width)).collect())
}

/// Mask selecting the given positions.
pub fn position_mask(positions: &[usize], width: usize) -> LocalWord {
    positions.iter().fold(0, |acc, &p| acc | 1 << (width - 1 - p))
}

/// Fraction of positions of `T` where the words differ.
pub fn local_distance(a: LocalWord, b: LocalWord, width: usize) -> f64 {
    (a ^ b).count_ones() as f64 / width as f64
}

/// Fraction of the positions in `mask` where the words differ.
pub fn masked_distance(a: LocalWord, b: LocalWord, mask: LocalWord) -> f64 {
    ((a ^ b) & mask).count_ones() as f64 / mask.count_ones() as f64
}

/// `g|T` as a local word.
pub fn restrict_to_top(ds: &DoubleSampler, t: usize, g: &BitWord) -> LocalWord {
    local_word_from_bits(&g.restrict(&ds.top_sets()[t]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ListConfig {
    pub epsilon: f64,
    pub rho: f64,
}

impl ListConfig {
    pub fn new(epsilon: f64, rho: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon = {epsilon} must be positive")));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid(format!("rho = {rho} must be positive")));
        }
        Ok(ListConfig { epsilon, rho })
    }

    /// `rho = (eps0 / 2) 10^(-8 / epsilon)`, floored at the smallest normal float.
    pub fn default_rho(epsilon: f64, eps0: f64) -> f64 {
        (eps0 / 2.0 * 10f64.powf(-8.0 / epsilon)).max(f64::MIN_POSITIVE)
    }

    /// List size bound `ceil(8 / epsilon)`.
    pub fn max_list_size(&self) -> usize {
        (8.0 / self.epsilon - 1e-9).ceil() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub word: LocalWord,
    /// Children of `T` whose received value matches the word.
    pub hits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalList {
    pub top: usize,
    pub width: usize,
    /// Children of `T`; agreement of an entry is `hits / children`.
    pub children: usize,
    pub radius: f64,
    pub ladder: usize,
    pub entries: Vec<Candidate>,
    pub initial_size: usize,
    pub first_pass_size: usize,
}

impl LocalList {
    pub fn agreement(&self, entry: &Candidate) -> f64 {
        entry.hits as f64 / self.children as f64
    }

    pub fn words(&self) -> Vec<LocalWord> {
        self.entries.iter().map(|c| c.word).collect()
    }
}

/// `L0` sorted by decreasing hits, then lexicographically.
pub fn initial_list(ds: &DoubleSampler, t: usize, w: &ReceivedWord, epsilon: f64) -> Result<Vec<Candidate>> {
    let width = ds.m2();
    if width > MAX_LOCAL_WIDTH {
        return Err(Error::Budget(format!("top sets of size {width} exceed local enumeration limit {MAX_LOCAL_WIDTH}")));
    }
    if w.values.len() != ds.middle_sets().len() {
        return Err(Error::invalid("received word does not match the middle layer"));
    }
    let kids = ds.children(t);
    let constraints: Vec<(LocalWord, LocalWord)> = kids
        .iter()
        .map(|&s| {
            let positions = ds.positions_of(t, s);
            let value = &w.values[s];
            let pattern = positions.iter().zip(&value.0).fold(0, |acc, (&p, &b)| acc | (b as LocalWord) << (width - 1 - p));
            (position_mask(&positions, width), pattern)
        })
        .collect();
    let threshold = epsilon / 2.0 * kids.len() as f64 - 1e-9;
    let mut out: Vec<Candidate> = (0..(1 as LocalWord) << width)
        .filter_map(|word| {
            let hits = constraints.iter().filter(|&&(mask, pattern)| word & mask == pattern).count();
            (hits as f64 >= threshold && hits > 0).then_some(Candidate { word, hits })
        })
        .collect();
    out.sort_by(|a, b| b.hits.cmp(&a.hits).then(a.word.cmp(&b.word)));
    Ok(out)
}

/// Greedy maximal set, in the given order, of words pairwise at distance at least `radius`.
pub fn maximal_independent(list: &[Candidate], radius: f64, width: usize) -> Vec<Candidate> {
    let mut kept: Vec<Candidate> = Vec::new();
    for c in list {
        if kept.iter().all(|k| local_distance(k.word, c.word, width) >= radius - RADIUS_SLACK) {
            kept.push(*c);
        }
    }
    kept
}

/// Thins `L0` along the radius ladder. Returns the stable list, the radius of
/// the pass that left it unchanged, the ladder index, and `|L1|`.
pub fn prune(initial: &[Candidate], rho: f64, width: usize) -> (Vec<Candidate>, f64, usize, usize) {
    if initial.is_empty() {
        return (Vec::new(), rho, 0, 0);
    }
    let mut current = initial.to_vec();
    let mut radius = rho;
    let mut ladder = 0;
    let mut first_pass = None;
    loop {
        let next = maximal_independent(&current, radius, width);
        first_pass.get_or_insert(next.len());
        if next.len() == current.len() {
            return (current, radius, ladder, first_pass.unwrap_or(0));
        }
        current = next;
        radius *= 10.0;
        ladder += 1;
    }
}

pub fn local_list_decode(ds: &DoubleSampler, t: usize, w: &ReceivedWord, cfg: &ListConfig) -> Result<LocalList> {
    let initial = initial_list(ds, t, w, cfg.epsilon)?;
    let (entries, radius, ladder, first_pass_size) = prune(&initial, cfg.rho, ds.m2());
    Ok(LocalList {
        top: t,
        width: ds.m2(),
        children: ds.children(t).len(),
        radius,
        ladder,
        entries,
        initial_size: initial.len(),
        first_pass_size,
    })
}

/// Local lists for every top set of positive weight, in top-set order.
pub fn decode_all(ds: &DoubleSampler, w: &ReceivedWord, cfg: &ListConfig) -> Result<Vec<LocalList>> {
    (0..ds.top_sets().len()).map(|t| local_list_decode(ds, t, w, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{corrupt, encode, CorruptionMode};
    use crate::rng::rng_for;
    use proptest::prelude::*;
    use rand::Rng;

    fn cand(word: LocalWord, hits: usize) -> Candidate {
        Candidate { word, hits }
    }

    #[test]
    fn ladder_examples() {
        let (l, r, i, _) = prune(&[cand(0b10110, 3)], 0.01, 5);
        assert_eq!((l.len(), r, i), (1, 0.01, 0));
        let far = [cand(0b00000, 4), cand(0b11100, 3), cand(0b00111, 3)];
        let (l, r, i, _) = prune(&far, 0.3, 5);
        assert_eq!((l, r, i), (far.to_vec(), 0.3, 0));
        let close = [cand(0b00000, 4), cand(0b00001, 3)];
        let (l, r, i, first) = prune(&close, 0.3, 5);
        assert_eq!(l, vec![cand(0b00000, 4)]);
        assert_eq!(i, 1);
        assert!((r - 3.0).abs() < 1e-12);
        assert_eq!(first, 1);
        assert_eq!(prune(&[], 0.2, 5), (vec![], 0.2, 0, 0));
    }

    #[test]
    fn noiseless_word_with_full_threshold_lists_only_itself() {
        let ds = DoubleSampler::complete(8, 2, 4, 10_000).unwrap();
        let g: BitWord = "01101001".parse().unwrap();
        let f = encode(&ds, &g).unwrap();
        for t in [0, 13, 69] {
            let l = local_list_decode(&ds, t, &f, &ListConfig::new(2.0, 0.01).unwrap()).unwrap();
            assert_eq!(l.words(), vec![restrict_to_top(&ds, t, &g)]);
            assert_eq!(l.agreement(&l.entries[0]), 1.0);
        }
    }

    #[test]
    fn default_rho_follows_formula() {
        assert!((ListConfig::default_rho(0.5, 0.16) - 0.08e-16).abs() < 1e-30);
        assert!(ListConfig::default_rho(0.5, 0.0) > 0.0);
        assert_eq!(ListConfig::new(0.5, 1.0).unwrap().max_list_size(), 16);
        assert!(ListConfig::new(0.5, 0.0).is_err());
    }

    /// Agreement recomputed set by set from the received word.
    fn oracle_initial(ds: &DoubleSampler, t: usize, f: &ReceivedWord, eps: f64) -> Vec<LocalWord> {
        let top = &ds.top_sets()[t];
        let mut out = Vec::new();
        for word in 0..(1u32 << ds.m2()) {
            let bits = local_word_to_bits(word, ds.m2());
            let global: std::collections::HashMap<usize, bool> = top.iter().zip(&bits.0).map(|(&x, &b)| (x, b)).collect();
            let kids = ds.children(t);
            let good = kids
                .iter()
                .filter(|&&s| ds.middle_sets()[s].iter().zip(&f.values[s].0).all(|(x, b)| global[x] == *b))
                .count();
            if good > 0 && good as f64 / kids.len() as f64 >= eps / 2.0 - 1e-12 {
                out.push(word);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn initial_list_matches_oracle(seed in 0u64..60) {
            let ds = DoubleSampler::complete(8, 2, 4, 10_000).unwrap();
            let mut rng = rng_for(seed, &[]);
            let g = BitWord((0..8).map(|_| rng.gen()).collect());
            let f = corrupt(&encode(&ds, &g).unwrap(), 0.5, CorruptionMode::Random, seed).unwrap();
            let t = rng.gen_range(0..ds.top_sets().len());
            let mut ours: Vec<LocalWord> = initial_list(&ds, t, &f, 0.5).unwrap().iter().map(|c| c.word).collect();
            ours.sort();
            prop_assert_eq!(ours, oracle_initial(&ds, t, &f, 0.5));
        }

        #[test]
        fn pruned_lists_are_separated_and_covering(seed in 0u64..300, rho in 0.05f64..0.5) {
            let mut rng = rng_for(seed, &[1]);
            let width = 3 + (seed % 6) as usize;
            let mut initial: Vec<Candidate> = (0..rng.gen_range(1..20))
                .map(|_| cand(rng.gen_range(0..1u32 << width), rng.gen_range(1..10)))
                .collect();
            initial.sort_by(|a, b| b.hits.cmp(&a.hits).then(a.word.cmp(&b.word)));
            initial.dedup_by_key(|c| c.word);
            let (list, r, i, first) = prune(&initial, rho, width);
            prop_assert!(i <= first);
            for (a, x) in list.iter().enumerate() {
                prop_assert!(initial.contains(x));
                for y in &list[a + 1..] {
                    prop_assert!(local_distance(x.word, y.word, width) >= r - 1e-9);
                }
            }
            for c in &initial {
                let nearest = list.iter().map(|x| local_distance(x.word, c.word, width)).fold(f64::INFINITY, f64::min);
                prop_assert!(nearest <= r / 9.0 + 1e-12);
            }
        }
    }
}
