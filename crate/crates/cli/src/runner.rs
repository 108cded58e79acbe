//! Executes a run plan and writes the result tables.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use cadnet_core::config::{Aggregator, ExperimentConfig, KEYS};
use cadnet_core::data::{make_split, Dataset, Split, SplitKind, SplitSpec};
use cadnet_core::stats::{aggregate_stats, Summary};
use cadnet_core::train::{train_dataset, RunResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::Failure;

pub struct Plan {
    pub dataset: Dataset,
    pub config: ExperimentConfig,
    pub runs: usize,
    pub jobs: usize,
    pub split: SplitSpec,
    pub seed_base: u64,
    pub baseline: Option<Aggregator>,
    pub n_boot: usize,
    pub timing: bool,
    pub sweep: Option<Sweep>,
}

pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub gamma: Option<PathBuf>,
    pub params_dir: Option<PathBuf>,
}

const TRAIN_PER_CLASS: &str = "train_per_class";

pub struct Sweep {
    pub param: String,
    pub values: Vec<String>,
}

impl Sweep {
    pub fn new(param: &str, values: &[String]) -> Result<Self, Failure> {
        let param = param.trim().to_ascii_lowercase().replace('-', "_");
        if param == "seed" {
            return Err(Failure::usage("seeds are set with --seed-base and --runs, not swept"));
        }
        if param != TRAIN_PER_CLASS && !ExperimentConfig::is_key(&param) {
            return Err(Failure::usage(format!(
                "unknown sweep parameter '{param}'; expected {TRAIN_PER_CLASS} or one of {}",
                KEYS.join(", ")
            )));
        }
        let values: Vec<String> = values.iter().map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(Failure::usage("--values is empty"));
        }
        let sweep = Sweep { param, values };
        for v in &sweep.values {
            sweep.apply(&ExperimentConfig::default(), &SplitSpec::standard(), v)?;
        }
        Ok(sweep)
    }

    fn apply(&self, cfg: &ExperimentConfig, split: &SplitSpec, value: &str) -> Result<(ExperimentConfig, SplitSpec), Failure> {
        let mut cfg = cfg.clone();
        let mut split = split.clone();
        if self.param == TRAIN_PER_CLASS {
            let n = value
                .parse()
                .map_err(|_| Failure::usage(format!("{TRAIN_PER_CLASS} value '{value}' is not a count")))?;
            split.train_per_class = Some(n);
        } else {
            cfg.set(&self.param, value)?;
        }
        Ok((cfg, split))
    }
}

/// One configuration evaluated over all seeds, possibly alongside a baseline.
struct Variant {
    sweep_value: Option<String>,
    split_spec: SplitSpec,
    arms: Vec<ExperimentConfig>,
    splits: Vec<(u64, Split, String)>,
}

const COLUMNS: [&str; 21] = [
    "row",
    "dataset",
    "config_hash",
    "split",
    "split_id",
    "train_per_class",
    "sweep_param",
    "sweep_value",
    "test_acc",
    "best_val_epoch",
    "best_val_acc",
    "epochs_run",
    "wall_clock_ms",
    "n_runs",
    "mean",
    "std",
    "ci_low",
    "ci_high",
    "t_stat",
    "p_value",
    "baseline",
];

fn split_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn split_id(spec: &SplitSpec, seed: u64) -> String {
    match (spec.kind, spec.train_per_class) {
        (SplitKind::Standard, None) => "standard".to_string(),
        (kind, _) => format!("{kind}-{seed}"),
    }
}

fn build_variants(plan: &Plan) -> Result<Vec<Variant>, Failure> {
    let settings: Vec<(Option<String>, ExperimentConfig, SplitSpec)> = match &plan.sweep {
        None => vec![(None, plan.config.clone(), plan.split.clone())],
        Some(sweep) => sweep
            .values
            .iter()
            .map(|v| sweep.apply(&plan.config, &plan.split, v).map(|(c, s)| (Some(v.clone()), c, s)))
            .collect::<Result<_, _>>()?,
    };
    let mut variants = Vec::with_capacity(settings.len());
    for (sweep_value, cfg, split_spec) in settings {
        cfg.validate()?;
        let mut splits = Vec::with_capacity(plan.runs);
        for r in 0..plan.runs {
            let seed = plan.seed_base + r as u64;
            let split = make_split(&plan.dataset, &split_spec, &mut split_rng(seed))?;
            splits.push((seed, split, split_id(&split_spec, seed)));
        }
        let mut arms = vec![cfg.clone()];
        if let Some(b) = plan.baseline {
            arms.push(ExperimentConfig { aggregator: b, ..cfg });
        }
        variants.push(Variant { sweep_value, split_spec, arms, splits });
    }
    Ok(variants)
}

pub fn execute(plan: &Plan, out: &Outputs) -> Result<(), Failure> {
    let variants = build_variants(plan)?;
    let jobs: Vec<(usize, usize, usize)> = variants
        .iter()
        .enumerate()
        .flat_map(|(v, var)| (0..var.arms.len()).flat_map(move |a| (0..var.splits.len()).map(move |r| (v, a, r))))
        .collect();

    let total = jobs.len();
    let done = AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.jobs)
        .build()
        .map_err(|e| Failure::usage(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunResult, cadnet_core::Error>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(v, a, r)| {
                let var = &variants[v];
                let (seed, split, _) = &var.splits[r];
                let cfg = ExperimentConfig { seed: *seed, ..var.arms[a].clone() };
                let res = train_dataset(&plan.dataset, split, &cfg);
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Ok(rr) = &res {
                    eprintln!("[{k}/{total}] {} seed {seed}: test {:.4}", cfg.aggregator, rr.test_accuracy);
                }
                res
            })
            .collect()
    });
    let mut results = results.into_iter();

    let sink: Box<dyn Write> = match &out.csv {
        Some(p) => Box::new(File::create(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut csv = csv::Writer::from_writer(sink);
    let header: Vec<&str> = COLUMNS.iter().copied().chain(KEYS).collect();
    csv.write_record(&header)?;

    let mut gamma = match &out.gamma {
        Some(p) => {
            let mut w = csv::Writer::from_path(p)?;
            w.write_record(["aggregator", "sweep_value", "seed", "node", "gamma"])?;
            Some(w)
        }
        None => None,
    };
    if let Some(dir) = &out.params_dir {
        fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?;
    }

    let sweep_param = plan.sweep.as_ref().map(|s| s.param.clone()).unwrap_or_default();
    for var in &variants {
        let mut arm_accs: Vec<Vec<f64>> = Vec::new();
        for cfg in &var.arms {
            let mut accs = Vec::with_capacity(var.splits.len());
            for (seed, _, sid) in &var.splits {
                let r = results.next().expect("one result per job")?;
                let run_cfg = ExperimentConfig { seed: *seed, ..cfg.clone() };
                let mut row = Row::new(plan, var, &sweep_param, &run_cfg, "run");
                row.set("split_id", sid.clone());
                row.set("test_acc", r.test_accuracy.to_string());
                row.set("best_val_epoch", r.best_val_epoch.to_string());
                row.set("best_val_acc", r.best_val_accuracy.to_string());
                row.set("epochs_run", r.val_curve.len().to_string());
                if plan.timing {
                    row.set("wall_clock_ms", r.wall_clock_ms.to_string());
                }
                csv.write_record(row.cells())?;

                if let Some(w) = gamma.as_mut() {
                    for (node, g) in r.gamma_values.iter().enumerate() {
                        w.write_record([
                            cfg.aggregator.to_string(),
                            var.sweep_value.clone().unwrap_or_default(),
                            seed.to_string(),
                            node.to_string(),
                            g.to_string(),
                        ])?;
                    }
                }
                if let Some(dir) = &out.params_dir {
                    let mut name = format!("{}_{}", plan.dataset.name, cfg.aggregator);
                    if let Some(v) = &var.sweep_value {
                        name.push_str(&format!("_{sweep_param}-{v}"));
                    }
                    r.best_params.save(&dir.join(format!("{name}_seed{seed}.json")))?;
                }
                accs.push(r.test_accuracy);
            }
            arm_accs.push(accs);
        }

        if var.splits.len() < 2 {
            eprintln!("single run: no summary statistics");
            continue;
        }
        // Baseline summaries first so the primary summary closes each block.
        for a in (0..var.arms.len()).rev() {
            let baseline = (a == 0 && var.arms.len() > 1).then(|| arm_accs[1].as_slice());
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed_base);
            rng.set_stream(2);
            let s = aggregate_stats(&arm_accs[a], baseline, plan.n_boot, &mut rng)?;
            let mut row = Row::new(plan, var, &sweep_param, &var.arms[a], "summary");
            let first = plan.seed_base;
            let last = plan.seed_base + var.splits.len() as u64 - 1;
            let shared = var.split_spec.kind == SplitKind::Standard && var.split_spec.train_per_class.is_none();
            row.set("split_id", if shared { "standard".into() } else { "per-seed".into() });
            row.set_config("seed", format!("{first}-{last}"));
            fill_summary(&mut row, &s);
            if baseline.is_some() {
                row.set("baseline", var.arms[1].aggregator.to_string());
            }
            csv.write_record(row.cells())?;
            report(plan, var, &sweep_param, &var.arms[a], &s, baseline.map(|_| var.arms[1].aggregator));
        }
    }
    csv.flush()?;
    if let Some(mut w) = gamma {
        w.flush()?;
    }
    Ok(())
}

fn fill_summary(row: &mut Row, s: &Summary) {
    row.set("n_runs", s.n.to_string());
    row.set("mean", s.mean.to_string());
    row.set("std", s.std.to_string());
    row.set("ci_low", s.ci_low.to_string());
    row.set("ci_high", s.ci_high.to_string());
    if let Some(t) = s.t_stat {
        row.set("t_stat", t.to_string());
    }
    if let Some(p) = s.p_value {
        row.set("p_value", p.to_string());
    }
}

fn report(plan: &Plan, var: &Variant, param: &str, cfg: &ExperimentConfig, s: &Summary, baseline: Option<Aggregator>) {
    let mut line = format!("{} {}", plan.dataset.name, cfg.aggregator);
    if let Some(v) = &var.sweep_value {
        line.push_str(&format!(" {param}={v}"));
    }
    line.push_str(&format!(
        ": {:.2} +- {:.2} % over {} runs, 95% CI [{:.2}, {:.2}]",
        100.0 * s.mean,
        100.0 * s.std,
        s.n,
        100.0 * s.ci_low,
        100.0 * s.ci_high
    ));
    if let (Some(b), Some(p)) = (baseline, s.p_value) {
        line.push_str(&format!(", paired t-test vs {b}: p = {p:.3e}"));
    }
    eprintln!("{line}");
}

/// One CSV record: fixed columns followed by the full resolved configuration.
struct Row {
    cells: Vec<String>,
}

impl Row {
    fn new(plan: &Plan, var: &Variant, sweep_param: &str, cfg: &ExperimentConfig, kind: &str) -> Self {
        let mut row = Row { cells: vec![String::new(); COLUMNS.len() + KEYS.len()] };
        row.set("row", kind.to_string());
        row.set("dataset", plan.dataset.name.clone());
        row.set("config_hash", cfg.hash());
        row.set("split", var.split_spec.kind.to_string());
        row.set(
            "train_per_class",
            var.split_spec.train_per_class.map_or_else(|| "stored".to_string(), |n| n.to_string()),
        );
        if let Some(v) = &var.sweep_value {
            row.set("sweep_param", sweep_param.to_string());
            row.set("sweep_value", v.clone());
        }
        for (i, (_, v)) in cfg.fields().into_iter().enumerate() {
            row.cells[COLUMNS.len() + i] = v;
        }
        row
    }

    fn set(&mut self, column: &str, value: String) {
        let i = COLUMNS.iter().position(|c| *c == column).expect("known column");
        self.cells[i] = value;
    }

    fn set_config(&mut self, key: &str, value: String) {
        let i = KEYS.iter().position(|k| *k == key).expect("known config key");
        self.cells[COLUMNS.len() + i] = value;
    }

    fn cells(&self) -> &[String] {
        &self.cells
    }
}
