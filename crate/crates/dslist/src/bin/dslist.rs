use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use dslist::codes::{corrupt, encode, BaseCode, CodeSpec, CorruptionMode};
use dslist::error::{Error, Result};
use dslist::expander::{extract_expander, ExtractConfig};
use dslist::formats::{read_json, GraphFile, InstanceFile, MessageFile, ReceivedFile, SamplerFile, SolutionFile};
use dslist::graph::EigenConfig;
use dslist::pipeline::{approx_list_decode, list_decode, run_experiment, DecodeConfig, DecodeReport, ExperimentConfig};
use dslist::rng::rng_for;
use dslist::sampler::{spectral_sampler_bound, verify_sampler, DoubleSampler, SamplerReport, SpectralProfile};
use dslist::ug_solver::{list_solve_ug, solve_ug, SolverConfig};

#[derive(Parser)]
#[command(name = "dslist", version, about = "List decoding of distance-amplified codes over double samplers")]
struct Cli {
    /// Master seed; overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config for the chosen command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Write JSON here instead of standard output.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the complete complex on `n` points as a sampler file.
    BuildSampler {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m1: Option<usize>,
        #[arg(long)]
        m2: Option<usize>,
        /// Largest number of top sets allowed.
        #[arg(long)]
        budget: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Encode a word, or a message through a base code, over a sampler.
    Encode {
        #[arg(long)]
        sampler: PathBuf,
        /// Message file with the word (or the message when --code is given).
        #[arg(long)]
        word: PathBuf,
        #[arg(long)]
        code: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Corrupt a received word down to an agreement.
    Corrupt {
        #[arg(long)]
        sampler: PathBuf,
        #[arg(long)]
        received: PathBuf,
        #[arg(long)]
        agreement: Option<f64>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<CorruptionMode>,
        #[command(flatten)]
        output: Output,
    },
    /// List-decode a received word against a base code.
    Decode {
        #[arg(long)]
        sampler: PathBuf,
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        received: PathBuf,
        #[command(flatten)]
        decode: DecodeFlags,
        #[command(flatten)]
        output: Output,
    },
    /// List-decode without a base code, returning approximate words.
    ApproxDecode {
        #[arg(long)]
        sampler: PathBuf,
        #[arg(long)]
        received: PathBuf,
        #[command(flatten)]
        decode: DecodeFlags,
        #[command(flatten)]
        output: Output,
    },
    /// Solve a unique-games instance, or list-solve it with --list.
    SolveUg {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Prune a vertex set of a graph to an induced expander.
    ExtractExpander {
        #[arg(long)]
        graph: PathBuf,
        /// Comma separated vertex ids; all vertices when absent.
        #[arg(long, value_delimiter = ',')]
        vertices: Option<Vec<usize>>,
        #[command(flatten)]
        output: Output,
    },
    /// Spectral profile and sampler checks against a battery of test functions.
    VerifySampler {
        #[arg(long)]
        sampler: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Run a recovery experiment; --config is required.
    Bench {
        /// Recovery rate per agreement as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args)]
struct DecodeFlags {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    epsilon0: Option<f64>,
    /// Drop outputs below the target agreement.
    #[arg(long)]
    strict: bool,
}

fn parse_mode(s: &str) -> std::result::Result<CorruptionMode, String> {
    match s {
        "random" => Ok(CorruptionMode::Random),
        "adversarial" | "adversarial_planted" => Ok(CorruptionMode::AdversarialPlanted),
        _ => Err(format!("unknown mode {s:?}; use random or adversarial")),
    }
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SamplerConfig {
    n: Option<usize>,
    m1: Option<usize>,
    m2: Option<usize>,
    budget: Option<usize>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CorruptConfig {
    agreement: Option<f64>,
    mode: Option<CorruptionMode>,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct VerifyConfig {
    alpha: f64,
    delta: f64,
    /// Random indicator functions per layer on top of the two constants.
    functions: usize,
    eigen: EigenConfig,
    seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { alpha: 0.2, delta: 0.2, functions: 32, eigen: EigenConfig::default(), seed: 0 }
    }
}

#[derive(Serialize)]
struct VerifyReport {
    spectral: SpectralProfile,
    /// `delta` certified by the spectral bound at `alpha` for each layer pair.
    spectral_delta_top_middle: f64,
    spectral_delta_middle_element: f64,
    top_middle: SamplerReport,
    middle_element: SamplerReport,
}

fn config_or_default<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => read_json(p),
        None => Ok(T::default()),
    }
}

fn emit<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    match out {
        Some(p) => dslist::formats::write_json(p, value),
        None => {
            let text = serde_json::to_string_pretty(value)?;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn load_sampler(path: &Path) -> Result<DoubleSampler> {
    read_json::<SamplerFile>(path)?.to_sampler()
}

fn required<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| Error::invalid(format!("missing {name}; pass it as a flag or in --config")))
}

fn decode_config(cli: &Cli, flags: &DecodeFlags, eps0_default: f64) -> Result<DecodeConfig> {
    let mut cfg = match &cli.config {
        Some(p) => read_json::<DecodeConfig>(p)?,
        None => DecodeConfig::new(required(flags.epsilon, "--epsilon")?, eps0_default),
    };
    if let Some(e) = flags.epsilon {
        cfg.epsilon = e;
    }
    if let Some(e) = flags.epsilon0 {
        cfg.epsilon0 = e;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.strict |= flags.strict;
    Ok(cfg)
}

/// Writes the report, then signals stage failures through the exit code.
fn finish_decode(out: &Option<PathBuf>, report: &DecodeReport) -> Result<ExitCode> {
    emit(out, report)?;
    if report.stage_failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &report.stage_failures {
            eprintln!("stage failure: {f}");
        }
        Ok(ExitCode::from(3))
    }
}

fn random_indicators(count: usize, size: usize, seed: u64, tag: u64) -> Vec<Vec<f64>> {
    let mut fns = vec![vec![0.0; size], vec![1.0; size]];
    for k in 0..count {
        let mut rng = rng_for(seed, &[tag, k as u64]);
        let density = rng.gen::<f64>();
        fns.push((0..size).map(|_| if rng.gen::<f64>() < density { 1.0 } else { 0.0 }).collect());
    }
    fns
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::BuildSampler { n, m1, m2, budget, output } => {
            let cfg: SamplerConfig = config_or_default(&cli.config)?;
            let ds = DoubleSampler::complete(
                required(n.or(cfg.n), "n")?,
                required(m1.or(cfg.m1), "m1")?,
                required(m2.or(cfg.m2), "m2")?,
                budget.or(cfg.budget).unwrap_or(10_000_000),
            )?;
            emit(&output.out, &SamplerFile::from_sampler(&ds))?;
        }
        Command::Encode { sampler, word, code, output } => {
            let ds = load_sampler(sampler)?;
            let mut g = read_json::<MessageFile>(word)?.word()?;
            if let Some(code) = code {
                g = BaseCode::from_spec(&read_json::<CodeSpec>(code)?)?.encode(&g)?;
            }
            emit(&output.out, &ReceivedFile::from_word(&ds, &encode(&ds, &g)?))?;
        }
        Command::Corrupt { sampler, received, agreement, mode, output } => {
            let cfg: CorruptConfig = config_or_default(&cli.config)?;
            let ds = load_sampler(sampler)?;
            let w = read_json::<ReceivedFile>(received)?.to_word(&ds)?;
            let mode = mode.or(cfg.mode).unwrap_or(CorruptionMode::AdversarialPlanted);
            let corrupted = corrupt(&w, required(agreement.or(cfg.agreement), "agreement")?, mode, cli.seed.unwrap_or(cfg.seed))?;
            emit(&output.out, &ReceivedFile::from_word(&ds, &corrupted))?;
        }
        Command::Decode { sampler, code, received, decode, output } => {
            let ds = load_sampler(sampler)?;
            let code = BaseCode::from_spec(&read_json::<CodeSpec>(code)?)?;
            let w = read_json::<ReceivedFile>(received)?.to_word(&ds)?;
            let cfg = decode_config(cli, decode, code.eps0())?;
            return finish_decode(&output.out, &list_decode(&ds, &code, &w, &cfg)?);
        }
        Command::ApproxDecode { sampler, received, decode, output } => {
            let ds = load_sampler(sampler)?;
            let w = read_json::<ReceivedFile>(received)?.to_word(&ds)?;
            let cfg = decode_config(cli, decode, 0.0)?;
            return finish_decode(&output.out, &approx_list_decode(&ds, &w, &cfg)?);
        }
        Command::SolveUg { instance, list, output } => {
            let inst = read_json::<InstanceFile>(instance)?.to_instance()?;
            let mut cfg: SolverConfig = config_or_default(&cli.config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let solution = if *list {
                let l = list_solve_ug(&inst, &cfg)?;
                SolutionFile { assignments: l.assignments, values: l.values }
            } else {
                let s = solve_ug(&inst, &cfg)?;
                SolutionFile { assignments: vec![s.assignment], values: vec![s.value] }
            };
            emit(&output.out, &solution)?;
        }
        Command::ExtractExpander { graph, vertices, output } => {
            let g = read_json::<GraphFile>(graph)?.to_graph()?;
            let mut cfg: ExtractConfig = config_or_default(&cli.config)?;
            if let Some(s) = cli.seed {
                cfg.eigen.seed = s;
            }
            let a = vertices.clone().unwrap_or_else(|| (0..g.vertex_count()).collect());
            emit(&output.out, &extract_expander(&g, &a, &cfg)?)?;
        }
        Command::VerifySampler { sampler, alpha, delta, output } => {
            let mut cfg: VerifyConfig = config_or_default(&cli.config)?;
            cfg.alpha = alpha.unwrap_or(cfg.alpha);
            cfg.delta = delta.unwrap_or(cfg.delta);
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) {
                return Err(Error::invalid("alpha must lie in (0, 1]"));
            }
            let ds = load_sampler(sampler)?;
            let spectral = ds.spectral_profile(&cfg.eigen)?;
            let tm = ds.top_middle_graph()?;
            let me = ds.middle_element_graph()?;
            let report = VerifyReport {
                spectral_delta_top_middle: spectral_sampler_bound(spectral.top_middle, cfg.alpha),
                spectral_delta_middle_element: spectral_sampler_bound(spectral.middle_element, cfg.alpha),
                top_middle: verify_sampler(&tm, ds.top_law(), cfg.alpha, cfg.delta, &random_indicators(cfg.functions, tm.right_count(), cfg.seed, 1))?,
                middle_element: verify_sampler(&me, ds.middle_law(), cfg.alpha, cfg.delta, &random_indicators(cfg.functions, me.right_count(), cfg.seed, 2))?,
                spectral,
            };
            let passed = report.top_middle.passed && report.middle_element.passed;
            emit(&output.out, &report)?;
            if !passed {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Bench { csv, output } => {
            let path = required(cli.config.as_ref(), "--config")?;
            let mut cfg: ExperimentConfig = read_json(path)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let report = run_experiment(&cfg)?;
            if let Some(csv) = csv {
                report.write_csv(std::fs::File::create(csv)?)?;
            }
            emit(&output.out, &report)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
