//! Base codes, the amplified encoding `g -> (g|S)_S`, and corruption.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitWord;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for};
use crate::sampler::DoubleSampler;

/// Largest message length enumerated by brute-force decoding.
pub const MAX_BRUTE_FORCE_K: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CodeSpec {
    Repetition { n: usize, eps0: f64 },
    RandomLinear { n: usize, k: usize, eps0: f64, seed: u64 },
    Identity { n: usize },
    Explicit { n: usize, eps0: f64, generator: Vec<BitWord> },
}

/// A binary linear code with a unique-decoding radius of `eps0 * n`.
#[derive(Clone, Debug)]
pub struct BaseCode {
    n: usize,
    eps0: f64,
    generator: Vec<BitWord>,
    identity: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decoded {
    pub message: BitWord,
    pub codeword: BitWord,
    pub distance: usize,
}

impl BaseCode {
    pub fn from_spec(spec: &CodeSpec) -> Result<Self> {
        match spec {
            CodeSpec::Repetition { n, eps0 } => Self::repetition(*n, *eps0),
            CodeSpec::RandomLinear { n, k, eps0, seed } => Self::random_linear(*n, *k, *eps0, *seed),
            CodeSpec::Identity { n } => Ok(Self::identity(*n)),
            CodeSpec::Explicit { n, eps0, generator } => Self::explicit(*n, *eps0, generator.clone()),
        }
    }

    fn check_radius(eps0: f64) -> Result<()> {
        if !(0.0..0.5).contains(&eps0) {
            return Err(Error::invalid(format!("eps0 = {eps0} must lie in [0, 1/2)")));
        }
        Ok(())
    }

    pub fn repetition(n: usize, eps0: f64) -> Result<Self> {
        Self::check_radius(eps0)?;
        if n == 0 {
            return Err(Error::invalid("empty code"));
        }
        Ok(BaseCode { n, eps0, generator: vec![BitWord(vec![true; n])], identity: false })
    }

    /// The whole space; decodes every word to itself.
    pub fn identity(n: usize) -> Self {
        let generator = (0..n).map(|i| BitWord((0..n).map(|j| i == j).collect())).collect();
        BaseCode { n, eps0: 0.0, generator, identity: true }
    }

    pub fn explicit(n: usize, eps0: f64, generator: Vec<BitWord>) -> Result<Self> {
        Self::check_radius(eps0)?;
        if generator.is_empty() || generator.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("generator rows must be non-empty and of length n"));
        }
        Ok(BaseCode { n, eps0, generator, identity: false })
    }

    /// Seeded random generator, redrawn until the minimum distance exceeds
    /// twice the decoding radius.
    pub fn random_linear(n: usize, k: usize, eps0: f64, seed: u64) -> Result<Self> {
        Self::check_radius(eps0)?;
        if k == 0 || k > n || k > MAX_BRUTE_FORCE_K {
            return Err(Error::invalid(format!("need 1 <= k <= min(n, {MAX_BRUTE_FORCE_K}), got k={k} n={n}")));
        }
        for attempt in 0..1000u64 {
            let mut rng = rng_for(derive_seed(seed, &[attempt]), &[]);
            let generator = (0..k).map(|_| BitWord((0..n).map(|_| rng.gen()).collect())).collect();
            let code = BaseCode { n, eps0, generator, identity: false };
            if code.min_distance()? > 2 * code.radius() {
                return Ok(code);
            }
        }
        Err(Error::invalid(format!("no [{n},{k}] code found with distance above {}", 2.0 * eps0 * n as f64)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.generator.len()
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn generator(&self) -> &[BitWord] {
        &self.generator
    }

    /// Largest number of errors unique decoding accepts.
    pub fn radius(&self) -> usize {
        (self.eps0 * self.n as f64 + 1e-9).floor() as usize
    }

    pub fn encode(&self, message: &BitWord) -> Result<BitWord> {
        if message.len() != self.k() {
            return Err(Error::invalid(format!("message length {} differs from k = {}", message.len(), self.k())));
        }
        let mut out = BitWord::zeros(self.n);
        for (row, &bit) in self.generator.iter().zip(&message.0) {
            if bit {
                out = out.xor(row);
            }
        }
        Ok(out)
    }

    /// Minimum weight of a nonzero codeword; zero if the generator is singular.
    pub fn min_distance(&self) -> Result<usize> {
        let mut best = usize::MAX;
        self.for_each_codeword(|msg, word| {
            if msg != 0 {
                best = best.min(word.iter().filter(|b| **b).count());
            }
        })?;
        Ok(best)
    }

    /// Visits all codewords in Gray-code order; the first argument is the message mask.
    fn for_each_codeword(&self, mut visit: impl FnMut(u64, &[bool])) -> Result<()> {
        let k = self.k();
        if k > MAX_BRUTE_FORCE_K {
            return Err(Error::Budget(format!("k = {k} exceeds brute-force limit {MAX_BRUTE_FORCE_K}")));
        }
        let mut word = vec![false; self.n];
        let mut mask = 0u64;
        visit(mask, &word);
        for i in 1u64..(1 << k) {
            let flip = i.trailing_zeros() as usize;
            mask ^= 1 << flip;
            for (w, r) in word.iter_mut().zip(&self.generator[flip].0) {
                *w ^= *r;
            }
            visit(mask, &word);
        }
        Ok(())
    }

    /// The codeword within the decoding radius, if any.
    pub fn unique_decode(&self, w: &BitWord) -> Result<Option<Decoded>> {
        if w.len() != self.n {
            return Err(Error::invalid(format!("word length {} differs from n = {}", w.len(), self.n)));
        }
        if self.identity {
            return Ok(Some(Decoded { message: w.clone(), codeword: w.clone(), distance: 0 }));
        }
        brute_force_unique_decode(self, w)
    }
}

/// Enumerates all `2^k` codewords. Two nearest codewords tied inside the
/// radius are an error.
pub fn brute_force_unique_decode(code: &BaseCode, w: &BitWord) -> Result<Option<Decoded>> {
    let mut best: Option<(usize, u64, BitWord)> = None;
    let mut tied = false;
    code.for_each_codeword(|mask, word| {
        let d = word.iter().zip(&w.0).filter(|(a, b)| a != b).count();
        match &best {
            Some((bd, _, _)) if d > *bd => {}
            Some((bd, _, _)) if d == *bd => tied = true,
            _ => {
                best = Some((d, mask, BitWord(word.to_vec())));
                tied = false;
            }
        }
    })?;
    let (distance, mask, codeword) = best.expect("at least the zero codeword");
    if distance > code.radius() {
        return Ok(None);
    }
    if tied {
        return Err(Error::Ambiguous(format!("two codewords at distance {distance} from {w}")));
    }
    let message = BitWord((0..code.k()).map(|i| mask >> i & 1 == 1).collect());
    Ok(Some(Decoded { message, codeword, distance }))
}

/// One value per `V1` copy, in the order of the sampler's middle layer; the
/// bits follow the sorted elements of the copy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReceivedWord {
    pub values: Vec<BitWord>,
}

pub fn encode(ds: &DoubleSampler, g: &BitWord) -> Result<ReceivedWord> {
    if g.len() != ds.n() {
        return Err(Error::invalid(format!("word length {} differs from n = {}", g.len(), ds.n())));
    }
    Ok(ReceivedWord { values: ds.middle_sets().iter().map(|s| g.restrict(s)).collect() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionMode {
    /// Corrupted copies get a uniformly random different value.
    Random,
    /// Corrupted copies get the complement, planting the complemented word.
    AdversarialPlanted,
}

/// Keeps exactly `ceil(eps * |V1|)` uniformly chosen copies and corrupts the rest.
pub fn corrupt(w: &ReceivedWord, eps: f64, mode: CorruptionMode, seed: u64) -> Result<ReceivedWord> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid(format!("agreement {eps} outside [0, 1]")));
    }
    let total = w.values.len();
    let keep = ((eps * total as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut rng = rng_for(seed, &[0xc0]);
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);
    let mut values = w.values.clone();
    for &i in &order[keep.min(total)..] {
        let old = &values[i];
        values[i] = match mode {
            CorruptionMode::AdversarialPlanted => old.complement(),
            CorruptionMode::Random => loop {
                let noise = BitWord((0..old.len()).map(|_| rng.gen()).collect());
                if noise.0.iter().any(|b| *b) {
                    break old.xor(&noise);
                }
            },
        };
    }
    Ok(ReceivedWord { values })
}

/// Probability over `S ~ law1` that the received value equals `g|S`.
pub fn agreement(ds: &DoubleSampler, w: &ReceivedWord, g: &BitWord) -> f64 {
    ds.middle_sets()
        .iter()
        .zip(&w.values)
        .zip(ds.middle_law())
        .filter(|((s, value), _)| **value == g.restrict(s))
        .map(|(_, p)| p)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn word(s: &str) -> BitWord {
        s.parse().unwrap()
    }

    #[test]
    fn repetition_decodes_by_majority() {
        let code = BaseCode::repetition(5, 0.4).unwrap();
        let d = code.unique_decode(&word("11010")).unwrap().unwrap();
        assert_eq!(d.codeword, word("11111"));
        assert_eq!(code.unique_decode(&word("00100")).unwrap().unwrap().codeword, word("00000"));
    }

    #[test]
    fn far_word_has_no_decoding() {
        let code = BaseCode::repetition(6, 0.2).unwrap();
        assert_eq!(code.unique_decode(&word("110100")).unwrap(), None);
    }

    #[test]
    fn ties_inside_radius_are_errors() {
        let code = BaseCode::explicit(4, 0.25, vec![word("1100"), word("0110")]).unwrap();
        assert!(matches!(code.unique_decode(&word("1000")), Err(Error::Ambiguous(_))));
    }

    #[test]
    fn identity_code_is_trivial() {
        let code = BaseCode::identity(40);
        let w = BitWord((0..40).map(|i| i % 3 == 0).collect());
        assert_eq!(code.unique_decode(&w).unwrap().unwrap().codeword, w);
    }

    #[test]
    fn random_code_has_promised_distance() {
        let code = BaseCode::random_linear(12, 4, 0.16, 7).unwrap();
        assert!(code.min_distance().unwrap() >= 2 * code.radius() + 1);
        let again = BaseCode::random_linear(12, 4, 0.16, 7).unwrap();
        assert_eq!(code.generator(), again.generator());
    }

    #[test]
    fn encoding_writes_restrictions() {
        let ds = DoubleSampler::complete(5, 2, 3, 1000).unwrap();
        let g = word("10110");
        let f = encode(&ds, &g).unwrap();
        assert_eq!(f.values[0], word("10"));
        assert!((agreement(&ds, &f, &g) - 1.0).abs() < 1e-12);
        let all_zero = BitWord::zeros(5);
        assert!(agreement(&ds, &encode(&ds, &all_zero).unwrap(), &g) < 1.0);
    }

    proptest! {
        #[test]
        fn codewords_decode_to_themselves(seed in 0u64..200, msg in 0u64..16) {
            let code = BaseCode::random_linear(12, 4, 0.16, seed).unwrap();
            let m = BitWord((0..4).map(|i| msg >> i & 1 == 1).collect());
            let c = code.encode(&m).unwrap();
            let d = code.unique_decode(&c).unwrap().unwrap();
            prop_assert_eq!(d.message, m);
            prop_assert_eq!(d.distance, 0);
            let mut noisy = c.clone();
            noisy.0[(seed % 12) as usize] ^= true;
            prop_assert_eq!(code.unique_decode(&noisy).unwrap().unwrap().codeword, c);
        }

        #[test]
        fn corruption_keeps_exact_agreement(seed in 0u64..100, eps in 0.0f64..=1.0, adversarial in any::<bool>()) {
            let ds = DoubleSampler::complete(8, 2, 4, 10_000).unwrap();
            let g = BitWord((0..8).map(|i| (seed >> i) & 1 == 1).collect());
            let mode = if adversarial { CorruptionMode::AdversarialPlanted } else { CorruptionMode::Random };
            let f = corrupt(&encode(&ds, &g).unwrap(), eps, mode, seed).unwrap();
            let total = ds.middle_sets().len();
            let keep = ((eps * total as f64) - 1e-9).ceil() as usize;
            prop_assert!((agreement(&ds, &f, &g) - keep as f64 / total as f64).abs() < 1e-12);
            if adversarial {
                prop_assert!((agreement(&ds, &f, &g.complement()) - (total - keep) as f64 / total as f64).abs() < 1e-12);
            }
        }
    }
}
