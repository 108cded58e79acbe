//! `cadnet`: train, sweep and validate class-attentive diffusion networks
//! on CADG v1 datasets.

mod runner;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cadnet_core::config::{Aggregator, EntropyReduction, ExperimentConfig};
use cadnet_core::data::{self, check_benchmark, load_dataset, SplitKind, SyntheticSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::runner::{Plan, Sweep};

#[derive(Parser)]
#[command(name = "cadnet", version, about = "Class-attentive diffusion networks for node classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate over several seeds.
    Train(TrainArgs),
    /// Repeat training for each value of one parameter.
    Sweep(SweepArgs),
    /// Load a dataset and check it against known statistics.
    Validate(ValidateArgs),
    /// Write a small synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn on(self) -> bool {
        self == OnOff::On
    }
}

#[derive(Args, Clone, Debug)]
struct ExperimentArgs {
    /// Dataset file in CADG v1 format.
    #[arg(long)]
    dataset: PathBuf,
    /// Start from a named hyperparameter preset.
    #[arg(long)]
    preset: Option<String>,
    /// key=value file applied after the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_aggregator)]
    aggregator: Option<Aggregator>,
    /// Number of diffusion steps.
    #[arg(long = "K", visible_alias = "k")]
    k: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "lambda-ent")]
    lambda_ent: Option<f64>,
    #[arg(long = "entropy-reduction", value_parser = parse_reduction)]
    entropy_reduction: Option<EntropyReduction>,
    #[arg(long = "self-loops")]
    self_loops: Option<OnOff>,
    /// Stop gradients through the class-attentive transition.
    #[arg(long = "detach-transition")]
    detach_transition: bool,
    #[arg(long = "normalize-features")]
    normalize_features: Option<OnOff>,
    /// Any other configuration key, as key=value. May be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "standard", value_parser = parse_split)]
    split: SplitKind,
    #[arg(long = "train-per-class")]
    train_per_class: Option<usize>,
    /// Validation size: total for random-planetoid, per class for random-per-class.
    #[arg(long)]
    val: Option<usize>,
    /// Test size for random splits; the remainder when absent on random-per-class.
    #[arg(long)]
    test: Option<usize>,
    /// First seed; run r uses seed-base + r.
    #[arg(long = "seed-base", default_value_t = 0)]
    seed_base: u64,
    /// Also run this aggregator on the same seeds and splits and report a paired t-test.
    #[arg(long = "compare-aggregator", value_parser = parse_aggregator)]
    compare_aggregator: Option<Aggregator>,
    #[arg(long = "n-boot", default_value_t = 1000)]
    n_boot: usize,

    /// Results CSV; written to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-node blend weights of every AdaCAD run as CSV.
    #[arg(long = "gamma-out")]
    gamma_out: Option<PathBuf>,
    /// Directory receiving the selected parameters of every run as JSON.
    #[arg(long = "save-params")]
    save_params: Option<PathBuf>,
    /// Record wall-clock time; off leaves the column empty so output is reproducible byte for byte.
    #[arg(long, default_value = "on")]
    timing: OnOff,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Configuration key to vary, or train_per_class.
    #[arg(long)]
    param: String,
    /// Comma separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "nodes-per-class", default_value_t = 40)]
    nodes_per_class: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 60)]
    features: usize,
}

fn parse_aggregator(s: &str) -> Result<Aggregator, String> {
    s.parse().map_err(|e: cadnet_core::Error| e.to_string())
}

fn parse_reduction(s: &str) -> Result<EntropyReduction, String> {
    s.parse().map_err(|e: cadnet_core::Error| e.to_string())
}

fn parse_split(s: &str) -> Result<SplitKind, String> {
    s.parse().map_err(|e: cadnet_core::Error| e.to_string())
}

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

pub const EXIT_INVALID: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

impl Failure {
    pub fn usage(msg: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_USAGE, msg: msg.to_string() }
    }

    pub fn invalid(msg: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_INVALID, msg: msg.to_string() }
    }
}

impl From<cadnet_core::Error> for Failure {
    fn from(e: cadnet_core::Error) -> Self {
        use cadnet_core::Error as E;
        match e {
            E::Io { .. } | E::InvalidParameter(_) => Failure::usage(e),
            _ => Failure::invalid(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::usage(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

/// Preset, then config file, then individual flags.
fn resolve_config(a: &ExperimentArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &a.preset {
        Some(name) => ExperimentConfig::preset(name)?,
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    }
    if let Some(v) = a.aggregator {
        cfg.aggregator = v;
    }
    if let Some(v) = a.k {
        cfg.k = v;
    }
    if let Some(v) = a.beta {
        cfg.beta = v;
    }
    if let Some(v) = a.hidden {
        cfg.hidden = v;
    }
    if let Some(v) = a.lr {
        cfg.lr0 = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.lambda_ent {
        cfg.lambda_ent = v;
    }
    if let Some(v) = a.entropy_reduction {
        cfg.entropy_reduction = v;
    }
    if let Some(v) = a.self_loops {
        cfg.self_loops = v.on();
    }
    if a.detach_transition {
        cfg.detach_transition = true;
    }
    if let Some(v) = a.normalize_features {
        cfg.normalize_features = v.on();
    }
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build_plan(a: &ExperimentArgs, sweep: Option<Sweep>) -> Result<Plan, Failure> {
    if a.runs == 0 {
        return Err(Failure::usage("--runs must be at least 1"));
    }
    if a.jobs == 0 {
        return Err(Failure::usage("--jobs must be at least 1"));
    }
    let config = resolve_config(a)?;
    let dataset = load_dataset(&a.dataset)?;
    let mut split = data::SplitSpec::for_kind(a.split);
    if a.train_per_class.is_some() {
        split.train_per_class = a.train_per_class;
    }
    if let Some(v) = a.val {
        split.val = v;
    }
    if a.test.is_some() {
        split.test = a.test;
    }
    Ok(Plan {
        dataset,
        config,
        runs: a.runs,
        jobs: a.jobs,
        split,
        seed_base: a.seed_base,
        baseline: a.compare_aggregator,
        n_boot: a.n_boot,
        timing: a.timing.on(),
        sweep,
    })
}

fn cmd_train(a: TrainArgs) -> Result<(), Failure> {
    let plan = build_plan(&a.exp, None)?;
    runner::execute(&plan, &outputs(&a.exp))
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let sweep = Sweep::new(&a.param, &a.values)?;
    let plan = build_plan(&a.exp, Some(sweep))?;
    runner::execute(&plan, &outputs(&a.exp))
}

fn outputs(a: &ExperimentArgs) -> runner::Outputs {
    runner::Outputs { csv: a.out.clone(), gamma: a.gamma_out.clone(), params_dir: a.save_params.clone() }
}

fn cmd_validate(a: ValidateArgs) -> Result<(), Failure> {
    let d = load_dataset(&a.dataset)?;
    let edges = d.graph.n_undirected_edges();
    println!(
        "{}: structure OK ({} nodes, {edges} edges, {} features, {} classes)",
        display_name(&a.dataset, &d.name),
        d.n_nodes(),
        d.n_features(),
        d.n_classes
    );
    let Some(checks) = check_benchmark(&d) else {
        println!("'{}' is not a known benchmark; structural checks only", d.name);
        return Ok(());
    };
    let mut failed = Vec::new();
    let mut line = Vec::new();
    for c in &checks {
        if c.ok() {
            line.push(format!("{} {} OK", c.what, c.actual));
        } else {
            line.push(format!("{} {} MISMATCH (expected {})", c.what, c.actual, c.expected));
            failed.push(c.what);
        }
    }
    if let (Some(split), "citeseer" | "cora" | "pubmed") = (&d.standard_split, d.name.to_ascii_lowercase().as_str()) {
        for (what, actual, expected) in [
            ("train", split.train.len(), 20 * d.n_classes),
            ("val", split.val.len(), 500),
            ("test", split.test.len(), 1000),
        ] {
            if actual == expected {
                line.push(format!("{what} {actual} OK"));
            } else {
                line.push(format!("{what} {actual} MISMATCH (expected {expected})"));
                failed.push(what);
            }
        }
    }
    println!("{}", line.join(", "));
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::invalid(format!("failed checks: {}", failed.join(", "))))
    }
}

fn display_name(path: &Path, name: &str) -> String {
    format!("{} [{name}]", path.display())
}

fn cmd_synth(a: SynthArgs) -> Result<(), Failure> {
    let spec = SyntheticSpec {
        nodes_per_class: a.nodes_per_class,
        n_classes: a.classes,
        n_features: a.features,
        ..SyntheticSpec::default()
    };
    let d = data::synthetic(&spec, &mut ChaCha8Rng::seed_from_u64(a.seed))?;
    data::save_dataset(&d, &a.out)?;
    println!(
        "wrote {} ({} nodes, {} edges, {} features, {} classes)",
        a.out.display(),
        d.n_nodes(),
        d.graph.n_undirected_edges(),
        d.n_features(),
        d.n_classes
    );
    Ok(())
}
