//! The full decoder: local lists, constraint graph, expander extraction per
//! radius group, list solving, and reading a global word off each assignment.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitWord;
use crate::codes::{agreement, corrupt, encode, BaseCode, CodeSpec, CorruptionMode, ReceivedWord};
use crate::error::{Error, Result};
use crate::expander::{extract_expander, ExtractConfig};
use crate::local_lists::{decode_all, local_bit, ListConfig, LocalList};
use crate::rng::{derive_seed, rng_for};
use crate::sampler::DoubleSampler;
use crate::ug_instance::{build_constraint_graph, ConstraintGraph};
use crate::ug_solver::{list_solve_ug, SolverConfig};

fn default_repetitions() -> usize {
    3
}

fn default_report_tolerance() -> f64 {
    1e-9
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeConfig {
    /// Agreement the decoder is asked to handle.
    pub epsilon: f64,
    #[serde(default)]
    pub epsilon0: f64,
    /// Radius floor of the local lists; derived from the two epsilons when absent.
    #[serde(default)]
    pub rho: Option<f64>,
    /// Radius groups lighter than this are skipped; `epsilon / 16` when absent.
    #[serde(default)]
    pub group_measure_floor: Option<f64>,
    /// Label count of the constraint graph; the longest local list when absent.
    #[serde(default)]
    pub labels: Option<usize>,
    /// Independent word extractions per assignment.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Drop outputs whose agreement is below `epsilon - report_tolerance`.
    #[serde(default)]
    pub strict: bool,
    #[serde(default = "default_report_tolerance")]
    pub report_tolerance: f64,
    #[serde(default = "SolverConfig::budgeted")]
    pub solver: SolverConfig,
    #[serde(default)]
    pub extract: ExtractConfig,
    #[serde(default)]
    pub seed: u64,
}

impl DecodeConfig {
    pub fn new(epsilon: f64, epsilon0: f64) -> Self {
        DecodeConfig {
            epsilon,
            epsilon0,
            rho: None,
            group_measure_floor: None,
            labels: None,
            repetitions: default_repetitions(),
            strict: false,
            report_tolerance: default_report_tolerance(),
            solver: SolverConfig::budgeted(),
            extract: ExtractConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::invalid(format!("epsilon = {} must lie in (0, 1]", self.epsilon)));
        }
        if !(0.0..0.5).contains(&self.epsilon0) {
            return Err(Error::invalid(format!("epsilon0 = {} must lie in [0, 1/2)", self.epsilon0)));
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0 && rho <= 1.0) {
                return Err(Error::invalid(format!("rho = {rho} must lie in (0, 1]")));
            }
        }
        if self.labels == Some(0) {
            return Err(Error::invalid("labels must be positive"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be positive"));
        }
        self.solver.validate()
    }

    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or_else(|| ListConfig::default_rho(self.epsilon, self.epsilon0))
    }

    pub fn group_floor(&self) -> f64 {
        self.group_measure_floor.unwrap_or(self.epsilon / 16.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ListStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    /// Number of top sets per list size.
    pub histogram: BTreeMap<usize, usize>,
}

impl ListStats {
    fn of(lists: &[LocalList]) -> Self {
        let sizes: Vec<usize> = lists.iter().map(|l| l.entries.len()).collect();
        let mut histogram = BTreeMap::new();
        for &s in &sizes {
            *histogram.entry(s).or_insert(0) += 1;
        }
        ListStats {
            min: sizes.iter().copied().min().unwrap_or(0),
            max: sizes.iter().copied().max().unwrap_or(0),
            mean: if sizes.is_empty() { 0.0 } else { sizes.iter().sum::<usize>() as f64 / sizes.len() as f64 },
            histogram,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSummary {
    pub size: usize,
    pub measure: f64,
    pub lambda: f64,
    pub cuts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub ladder: usize,
    pub radius: f64,
    pub size: usize,
    pub measure: f64,
    /// Whether the group was heavy enough to be processed.
    pub processed: bool,
    pub extraction: Option<ExtractionSummary>,
    /// Value of each found assignment on the extracted instance.
    pub assignment_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub group: usize,
    pub assignment: usize,
    pub repetition: usize,
    pub word: BitWord,
    /// Elements with no top set of the extracted subgraph above them; their
    /// bit defaults to zero.
    pub uncovered: usize,
    pub decoded: Option<BitWord>,
    pub distance: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub word: BitWord,
    pub message: Option<BitWord>,
    pub agreement: f64,
    /// Agreement reaches `epsilon` up to the report tolerance.
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub epsilon: f64,
    pub rho: f64,
    pub labels: usize,
    pub list_sizes: ListStats,
    pub padding_failures: usize,
    pub groups: Vec<GroupReport>,
    pub candidates: Vec<CandidateReport>,
    pub output: Vec<OutputEntry>,
    pub stage_failures: Vec<String>,
}

impl DecodeReport {
    pub fn words(&self) -> Vec<&BitWord> {
        self.output.iter().map(|o| &o.word).collect()
    }

    pub fn contains(&self, word: &BitWord) -> bool {
        self.output.iter().any(|o| &o.word == word)
    }
}

/// Reads a word off an assignment: for each element, a top set of the
/// extracted subgraph above it is drawn and the element's bit is taken from
/// that set's assigned list entry.
fn extract_word(ds: &DoubleSampler, cg: &ConstraintGraph, labels: &[Option<usize>], allowed: &[bool], seed: u64, path: [u64; 3]) -> (BitWord, usize) {
    let mut uncovered = 0;
    let bits = (0..ds.n())
        .map(|j| {
            let choices = ds.top_given_element(j, Some(allowed));
            if choices.is_empty() {
                uncovered += 1;
                return false;
            }
            let mut rng = rng_for(seed, &[4, j as u64, path[0], path[1], path[2]]);
            let pick = WeightedIndex::new(choices.iter().map(|c| c.1)).expect("positive weights").sample(&mut rng);
            let t = choices[pick].0;
            let label = labels[t].expect("allowed top sets are labelled");
            let position = ds.position(t, j).expect("element inside its top set");
            local_bit(cg.words[t][label], position, ds.m2())
        })
        .collect();
    (BitWord(bits), uncovered)
}

fn run(ds: &DoubleSampler, code: Option<&BaseCode>, w: &ReceivedWord, cfg: &DecodeConfig) -> Result<DecodeReport> {
    cfg.validate()?;
    if w.values.len() != ds.middle_sets().len() {
        return Err(Error::invalid(format!("received word has {} values for {} copies", w.values.len(), ds.middle_sets().len())));
    }
    if let Some(code) = code {
        if code.n() != ds.n() {
            return Err(Error::invalid(format!("code length {} differs from n = {}", code.n(), ds.n())));
        }
    }
    let rho = cfg.rho();
    let lists = decode_all(ds, w, &ListConfig::new(cfg.epsilon, rho)?)?;
    let cg = build_constraint_graph(ds, &lists, cfg.labels, derive_seed(cfg.seed, &[6]))?;
    let mut report = DecodeReport {
        epsilon: cfg.epsilon,
        rho,
        labels: cg.instance.labels(),
        list_sizes: ListStats::of(&lists),
        padding_failures: cg.padding_failures.len(),
        groups: Vec::new(),
        candidates: Vec::new(),
        output: Vec::new(),
        stage_failures: Vec::new(),
    };
    let floor = cfg.group_floor();
    for (gi, group) in cg.groups.iter().enumerate() {
        let mut gr = GroupReport {
            ladder: group.ladder,
            radius: group.radius,
            size: group.vertices.len(),
            measure: group.measure,
            processed: group.measure >= floor - 1e-12,
            extraction: None,
            assignment_values: Vec::new(),
        };
        if !gr.processed || lists.iter().all(|l| l.entries.is_empty()) {
            gr.processed = false;
            report.groups.push(gr);
            continue;
        }
        let extraction = match extract_expander(cg.instance.graph(), &group.vertices, &cfg.extract) {
            Ok(e) => e,
            Err(e) => {
                report.stage_failures.push(format!("group {}: extraction failed: {e}", group.ladder));
                report.groups.push(gr);
                continue;
            }
        };
        gr.extraction = Some(ExtractionSummary {
            size: extraction.vertices.len(),
            measure: extraction.measure,
            lambda: extraction.lambda,
            cuts: extraction.steps.len(),
        });
        let solved = cg.instance.induced(&extraction.vertices).and_then(|(sub, ids)| {
            let solver = SolverConfig { seed: derive_seed(cfg.seed, &[5, gi as u64]), ..cfg.solver.clone() };
            Ok((list_solve_ug(&sub, &solver)?, ids))
        });
        let (solutions, ids) = match solved {
            Ok(s) => s,
            Err(e) => {
                report.stage_failures.push(format!("group {}: unique games failed: {e}", group.ladder));
                report.groups.push(gr);
                continue;
            }
        };
        gr.assignment_values = solutions.round_values.clone();
        let mut allowed = vec![false; ds.top_sets().len()];
        for &t in &ids {
            allowed[t] = true;
        }
        for (k, a) in solutions.assignments.iter().enumerate() {
            let mut labels = vec![None; ds.top_sets().len()];
            for (local, &t) in ids.iter().enumerate() {
                labels[t] = Some(a[local]);
            }
            for rep in 0..cfg.repetitions {
                let (word, uncovered) = extract_word(ds, &cg, &labels, &allowed, cfg.seed, [gi as u64, k as u64, rep as u64]);
                let mut cand = CandidateReport { group: group.ladder, assignment: k, repetition: rep, word, uncovered, decoded: None, distance: None };
                if let Some(code) = code {
                    match code.unique_decode(&cand.word) {
                        Ok(Some(d)) => {
                            cand.decoded = Some(d.codeword);
                            cand.distance = Some(d.distance);
                        }
                        Ok(None) => {}
                        Err(e) => report.stage_failures.push(format!("group {} assignment {k}: {e}", group.ladder)),
                    }
                }
                report.candidates.push(cand);
            }
        }
        report.groups.push(gr);
    }
    let mut seen: BTreeMap<String, OutputEntry> = BTreeMap::new();
    for cand in &report.candidates {
        let word = match code {
            Some(_) => match &cand.decoded {
                Some(c) => c.clone(),
                None => continue,
            },
            None => cand.word.clone(),
        };
        seen.entry(word.to_string()).or_insert_with(|| {
            let agree = agreement(ds, w, &word);
            let message = code.and_then(|c| c.unique_decode(&word).ok().flatten()).map(|d| d.message);
            OutputEntry { accepted: agree >= cfg.epsilon - cfg.report_tolerance, word, message, agreement: agree }
        });
    }
    let mut output: Vec<OutputEntry> = seen.into_values().filter(|o| o.accepted || !cfg.strict).collect();
    output.sort_by(|a, b| b.agreement.total_cmp(&a.agreement).then_with(|| a.word.to_string().cmp(&b.word.to_string())));
    report.output = output;
    Ok(report)
}

/// List decoding against a base code; outputs are base codewords.
pub fn list_decode(ds: &DoubleSampler, code: &BaseCode, w: &ReceivedWord, cfg: &DecodeConfig) -> Result<DecodeReport> {
    run(ds, Some(code), w, cfg)
}

/// The same pipeline without base decoding; outputs are the extracted words.
pub fn approx_list_decode(ds: &DoubleSampler, w: &ReceivedWord, cfg: &DecodeConfig) -> Result<DecodeReport> {
    run(ds, None, w, cfg)
}

fn default_sampler_budget() -> usize {
    10_000_000
}

fn default_mode() -> CorruptionMode {
    CorruptionMode::AdversarialPlanted
}

/// A sweep of seeded trials: encode a random message, corrupt down to each
/// agreement, decode, and count how often the planted codeword comes back.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    #[serde(default = "default_sampler_budget")]
    pub sampler_budget: usize,
    pub code: CodeSpec,
    #[serde(default = "default_mode")]
    pub mode: CorruptionMode,
    pub agreements: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub decode: DecodeConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub agreement: f64,
    pub trial: usize,
    pub seed: u64,
    pub message: BitWord,
    pub recovered: bool,
    pub output_size: usize,
    pub stage_failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub agreement: f64,
    pub trials: usize,
    pub recovered: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub trials: Vec<TrialRecord>,
}

impl ExperimentReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for row in &self.rows {
            writer.serialize(row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.decode.validate()?;
    if cfg.trials == 0 || cfg.agreements.is_empty() {
        return Err(Error::invalid("an experiment needs at least one trial and one agreement"));
    }
    let ds = DoubleSampler::complete(cfg.n, cfg.m1, cfg.m2, cfg.sampler_budget)?;
    let code = BaseCode::from_spec(&cfg.code)?;
    let mut report = ExperimentReport { rows: Vec::new(), trials: Vec::new() };
    for (ai, &agree) in cfg.agreements.iter().enumerate() {
        let mut recovered = 0;
        for trial in 0..cfg.trials {
            let seed = derive_seed(cfg.seed, &[ai as u64, trial as u64]);
            let mut rng = rng_for(seed, &[7]);
            let message = BitWord((0..code.k()).map(|_| rng.gen()).collect());
            let planted = code.encode(&message)?;
            let w = corrupt(&encode(&ds, &planted)?, agree, cfg.mode, seed)?;
            let decode = DecodeConfig { seed, ..cfg.decode.clone() };
            let out = list_decode(&ds, &code, &w, &decode)?;
            let hit = out.contains(&planted);
            recovered += hit as usize;
            report.trials.push(TrialRecord {
                agreement: agree,
                trial,
                seed,
                message,
                recovered: hit,
                output_size: out.output.len(),
                stage_failures: out.stage_failures.len(),
            });
        }
        report.rows.push(ExperimentRow { agreement: agree, trials: cfg.trials, recovered, rate: recovered as f64 / cfg.trials as f64 });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (DoubleSampler, BaseCode) {
        let ds = DoubleSampler::complete(8, 2, 4, 100_000).unwrap();
        let code = BaseCode::random_linear(8, 2, 0.125, 3).unwrap();
        (ds, code)
    }

    #[test]
    fn clean_word_is_recovered() {
        let (ds, code) = fixture();
        let c = code.encode(&"10".parse().unwrap()).unwrap();
        let w = encode(&ds, &c).unwrap();
        let report = list_decode(&ds, &code, &w, &DecodeConfig::new(0.5, 0.125)).unwrap();
        assert!(report.contains(&c), "{:?}", report.output);
        assert_eq!(report.output[0].word, c);
        assert!(report.output.iter().all(|o| code.unique_decode(&o.word).unwrap().unwrap().codeword == o.word));
    }

    #[test]
    fn approximate_decoding_of_clean_word() {
        let ds = DoubleSampler::complete(8, 2, 4, 100_000).unwrap();
        let g: BitWord = "01101001".parse().unwrap();
        let w = encode(&ds, &g).unwrap();
        let report = approx_list_decode(&ds, &w, &DecodeConfig::new(0.5, 0.0)).unwrap();
        assert!(report.contains(&g));
    }

    #[test]
    fn deterministic_reports() {
        let (ds, code) = fixture();
        let c = code.encode(&"11".parse().unwrap()).unwrap();
        let w = corrupt(&encode(&ds, &c).unwrap(), 0.7, CorruptionMode::AdversarialPlanted, 4).unwrap();
        let cfg = DecodeConfig { seed: 9, ..DecodeConfig::new(0.6, 0.125) };
        let a = list_decode(&ds, &code, &w, &cfg).unwrap();
        let b = list_decode(&ds, &code, &w, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn strict_mode_filters_by_agreement() {
        let (ds, code) = fixture();
        let c = code.encode(&"01".parse().unwrap()).unwrap();
        let w = corrupt(&encode(&ds, &c).unwrap(), 0.6, CorruptionMode::AdversarialPlanted, 1).unwrap();
        let cfg = DecodeConfig { strict: true, ..DecodeConfig::new(0.55, 0.125) };
        let report = list_decode(&ds, &code, &w, &cfg).unwrap();
        assert!(report.output.iter().all(|o| o.accepted && o.agreement >= 0.55 - 1e-9));
    }

    #[test]
    fn experiment_rows_count_recoveries() {
        let cfg = ExperimentConfig {
            n: 8,
            m1: 2,
            m2: 4,
            sampler_budget: 100_000,
            code: CodeSpec::RandomLinear { n: 8, k: 2, eps0: 0.125, seed: 3 },
            mode: CorruptionMode::AdversarialPlanted,
            agreements: vec![1.0, 0.7],
            trials: 2,
            seed: 5,
            decode: DecodeConfig::new(0.5, 0.125),
        };
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.trials.len(), 4);
        assert_eq!(report.rows[0].recovered, 2);
        for row in &report.rows {
            let hits = report.trials.iter().filter(|t| t.agreement == row.agreement && t.recovered).count();
            assert_eq!(hits, row.recovered);
        }
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("agreement,trials,recovered,rate\n1.0,2,2,1.0\n"), "{text}");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (ds, code) = fixture();
        let w = encode(&ds, &code.encode(&"01".parse().unwrap()).unwrap()).unwrap();
        assert!(list_decode(&ds, &code, &w, &DecodeConfig::new(0.0, 0.1)).is_err());
        assert!(list_decode(&ds, &code, &w, &DecodeConfig::new(0.5, 0.5)).is_err());
        let short = ReceivedWord { values: w.values[1..].to_vec() };
        assert!(list_decode(&ds, &code, &short, &DecodeConfig::new(0.5, 0.1)).is_err());
    }
}
