use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::Rng;

use dslist::bits::BitWord;
use dslist::codes::{agreement, corrupt, encode, BaseCode, CodeSpec, CorruptionMode, ReceivedWord};
use dslist::pipeline::{approx_list_decode, list_decode, run_experiment, DecodeConfig, ExperimentConfig};
use dslist::rng::rng_for;
use dslist::sampler::DoubleSampler;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

fn small() -> DoubleSampler {
    DoubleSampler::complete(10, 2, 4, 1_000_000).unwrap()
}

#[test]
fn outputs_are_codewords_ordered_by_agreement() {
    let ds = small();
    let code = BaseCode::random_linear(10, 3, 0.1, 1).unwrap();
    for seed in 0..3u64 {
        let planted = code.encode(&"110".parse().unwrap()).unwrap();
        let w = corrupt(&encode(&ds, &planted).unwrap(), 0.7, CorruptionMode::AdversarialPlanted, seed).unwrap();
        let report = list_decode(&ds, &code, &w, &DecodeConfig { seed, ..DecodeConfig::new(0.5, 0.1) }).unwrap();
        assert!(report.contains(&planted));
        for pair in report.output.windows(2) {
            assert!(pair[0].agreement >= pair[1].agreement);
        }
        let words: BTreeSet<String> = report.output.iter().map(|o| o.word.to_string()).collect();
        assert_eq!(words.len(), report.output.len());
        for o in &report.output {
            assert_eq!(&code.encode(o.message.as_ref().unwrap()).unwrap(), &o.word);
            assert!((o.agreement - agreement(&ds, &w, &o.word)).abs() < 1e-12);
        }
    }
}

#[test]
fn approximate_outputs_land_near_the_planted_word() {
    let ds = small();
    let mut close = 0;
    for seed in 0..10u64 {
        let mut rng = rng_for(seed, &[1]);
        let g = BitWord((0..10).map(|_| rng.gen()).collect());
        let w = corrupt(&encode(&ds, &g).unwrap(), 0.6, CorruptionMode::AdversarialPlanted, seed).unwrap();
        let report = approx_list_decode(&ds, &w, &DecodeConfig { seed, ..DecodeConfig::new(0.5, 0.0) }).unwrap();
        if report.output.iter().any(|o| o.word.hamming(&g) as f64 <= 0.15 * 10.0) {
            close += 1;
        }
    }
    assert!(close >= 7, "{close}/10");
}

#[test]
fn unrelated_words_give_only_flagged_outputs() {
    let ds = small();
    let code = BaseCode::random_linear(10, 3, 0.1, 2).unwrap();
    let codewords: Vec<BitWord> = (0..8u32)
        .map(|m| code.encode(&BitWord((0..3).map(|i| m >> (2 - i) & 1 == 1).collect())).unwrap())
        .collect();
    for seed in 0..3u64 {
        // Fresh random values on every copy.
        let mut rng = rng_for(seed, &[2]);
        let w = ReceivedWord { values: ds.middle_sets().iter().map(|s| BitWord(s.iter().map(|_| rng.gen()).collect())).collect() };
        let best = codewords.iter().map(|c| agreement(&ds, &w, c)).fold(0.0, f64::max);
        let epsilon = 0.6;
        assert!(best < epsilon);
        let report = list_decode(&ds, &code, &w, &DecodeConfig { seed, ..DecodeConfig::new(epsilon, 0.1) }).unwrap();
        assert!(report.output.iter().all(|o| !o.accepted));
        let strict = list_decode(&ds, &code, &w, &DecodeConfig { seed, strict: true, ..DecodeConfig::new(epsilon, 0.1) }).unwrap();
        assert!(strict.output.is_empty());
    }
}

#[test]
fn empty_local_lists_give_empty_output() {
    // One top set over three points; the pair values disagree pairwise on
    // every shared point, so no local word matches two of them.
    let ds = DoubleSampler::new(3, 2, 3, vec![vec![0, 1], vec![0, 2], vec![1, 2]], vec![vec![0, 1, 2]], None).unwrap();
    let w = ReceivedWord { values: vec!["00".parse().unwrap(), "10".parse().unwrap(), "11".parse().unwrap()] };
    let report = approx_list_decode(&ds, &w, &DecodeConfig::new(1.0, 0.0)).unwrap();
    assert_eq!(report.list_sizes.max, 0);
    assert!(report.output.is_empty());
    assert!(report.stage_failures.is_empty());
}

#[test]
fn more_repetitions_never_lose_outputs() {
    let ds = small();
    let code = BaseCode::random_linear(10, 3, 0.1, 4).unwrap();
    for seed in 0..3u64 {
        let planted = code.encode(&"011".parse().unwrap()).unwrap();
        let w = corrupt(&encode(&ds, &planted).unwrap(), 0.6, CorruptionMode::AdversarialPlanted, seed).unwrap();
        let words = |reps| {
            let cfg = DecodeConfig { seed, repetitions: reps, ..DecodeConfig::new(0.5, 0.1) };
            list_decode(&ds, &code, &w, &cfg).unwrap().output.into_iter().map(|o| o.word.to_string()).collect::<BTreeSet<_>>()
        };
        assert!(words(1).is_subset(&words(3)));
    }
}

fn experiment(agreements: Vec<f64>, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        n: 8,
        m1: 2,
        m2: 4,
        sampler_budget: 1_000_000,
        code: CodeSpec::RandomLinear { n: 8, k: 2, eps0: 0.125, seed: 7 },
        mode: CorruptionMode::Random,
        agreements,
        trials,
        seed: 1,
        decode: DecodeConfig::new(0.3, 0.125),
    }
}

#[test]
fn recovery_trends_upward_with_agreement() {
    let report = run_experiment(&experiment(vec![0.3, 0.5, 0.7, 0.9], 4)).unwrap();
    let rates: Vec<f64> = report.rows.iter().map(|r| r.rate).collect();
    assert!(rates[3] >= rates[0], "{rates:?}");
    assert_eq!(rates[3], 1.0, "{rates:?}");
}

#[test]
fn experiment_rejects_bad_samplers() {
    let cfg = ExperimentConfig { m2: 9, ..experiment(vec![0.5], 1) };
    assert!(run_experiment(&cfg).is_err());
}

#[test]
fn golden_experiment_is_reproduced_byte_for_byte() {
    let dir = golden_dir();
    let cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(dir.join("experiment.json")).unwrap()).unwrap();
    let report = run_experiment(&cfg).unwrap();
    let mut json = serde_json::to_string_pretty(&report).unwrap();
    json.push('\n');
    assert_eq!(json, std::fs::read_to_string(dir.join("report.json")).unwrap());
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap(), std::fs::read_to_string(dir.join("report.csv")).unwrap());
}
