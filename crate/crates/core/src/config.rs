//! Experiment hyperparameters and the per-dataset presets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which aggregation stage sits between the MLP and the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregator {
    AdaCad,
    CadOnly,
    Rw,
    SymNa,
    Ppr,
    Hk,
    None,
}

impl Aggregator {
    pub const ALL: [Aggregator; 7] = [
        Aggregator::AdaCad,
        Aggregator::CadOnly,
        Aggregator::Rw,
        Aggregator::SymNa,
        Aggregator::Ppr,
        Aggregator::Hk,
        Aggregator::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Aggregator::AdaCad => "adacad",
            Aggregator::CadOnly => "cad-only",
            Aggregator::Rw => "rw",
            Aggregator::SymNa => "symna",
            Aggregator::Ppr => "ppr",
            Aggregator::Hk => "hk",
            Aggregator::None => "none",
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Aggregator::ALL
            .into_iter()
            .find(|a| a.name() == key || (key == "cad" && *a == Aggregator::CadOnly))
            .ok_or_else(|| Error::invalid(format!("unknown aggregator '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyReduction {
    Mean,
    Sum,
}

impl fmt::Display for EntropyReduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntropyReduction::Mean => "mean",
            EntropyReduction::Sum => "sum",
        })
    }
}

impl FromStr for EntropyReduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(EntropyReduction::Mean),
            "sum" => Ok(EntropyReduction::Sum),
            _ => Err(Error::invalid(format!("entropy reduction must be mean or sum, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopMetric {
    Acc,
    Loss,
}

impl fmt::Display for StopMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopMetric::Acc => "acc",
            StopMetric::Loss => "loss",
        })
    }
}

impl FromStr for StopMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acc" => Ok(StopMetric::Acc),
            "loss" => Ok(StopMetric::Loss),
            _ => Err(Error::invalid(format!("early stop metric must be acc or loss, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub hidden: usize,
    /// Number of diffusion steps.
    pub k: usize,
    pub beta: f64,
    pub leak_slope: f64,
    pub p_drop: f64,
    pub self_loops: bool,
    pub epochs: usize,
    pub lr0: f64,
    pub lr_drop_every: Option<usize>,
    pub lr_drop_factor: f64,
    pub weight_decay: f64,
    /// Apply weight decay to biases as well as weights.
    pub decay_biases: bool,
    pub lambda_ent: f64,
    pub entropy_reduction: EntropyReduction,
    pub early_stop_window: Option<usize>,
    pub early_stop_metric: StopMetric,
    pub seed: u64,
    pub aggregator: Aggregator,
    /// Cut the gradient path through the class likelihoods used by the
    /// transition matrix and the blend weights.
    pub detach_transition: bool,
    pub ppr_alpha: f64,
    pub heat_t: f64,
    /// Iterations of the truncated PPR / heat-kernel series.
    pub series_steps: usize,
    pub normalize_features: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            hidden: 64,
            k: 4,
            beta: 0.8,
            leak_slope: 0.05,
            p_drop: 0.5,
            self_loops: true,
            epochs: 200,
            lr0: 0.01,
            lr_drop_every: None,
            lr_drop_factor: 0.5,
            weight_decay: 5e-4,
            decay_biases: true,
            lambda_ent: 0.3,
            entropy_reduction: EntropyReduction::Mean,
            early_stop_window: None,
            early_stop_metric: StopMetric::Acc,
            seed: 0,
            aggregator: Aggregator::AdaCad,
            detach_transition: false,
            ppr_alpha: 0.1,
            heat_t: 5.0,
            series_steps: 30,
            normalize_features: true,
        }
    }
}

/// Names accepted by [`ExperimentConfig::preset`].
pub const PRESETS: [&str; 7] = [
    "citeseer",
    "cora",
    "pubmed",
    "amazon-comp",
    "amazon-photo",
    "coauthor-cs",
    "coauthor-phy",
];

/// Keys accepted by [`ExperimentConfig::set`], in CSV column order.
pub const KEYS: [&str; 23] = [
    "aggregator",
    "hidden",
    "k",
    "beta",
    "leak_slope",
    "p_drop",
    "self_loops",
    "epochs",
    "lr",
    "lr_drop_every",
    "lr_drop_factor",
    "weight_decay",
    "decay_biases",
    "lambda_ent",
    "entropy_reduction",
    "early_stop_window",
    "early_stop_metric",
    "seed",
    "detach_transition",
    "ppr_alpha",
    "heat_t",
    "series_steps",
    "normalize_features",
];

impl ExperimentConfig {
    /// Hyperparameters tuned per benchmark dataset.
    pub fn preset(name: &str) -> Result<Self> {
        struct Row {
            leak: f64,
            p_drop: f64,
            k: usize,
            beta: f64,
            self_loops: bool,
            epochs: usize,
            lr: f64,
            lr_drop: Option<usize>,
            wd: f64,
            lambda: f64,
            early: Option<usize>,
        }
        let row = match normalize_key(name).as_str() {
            "citeseer" => Row { leak: 0.05, p_drop: 0.3, k: 3, beta: 0.7, self_loops: true, epochs: 200, lr: 0.03, lr_drop: Some(100), wd: 5e-4, lambda: 0.3, early: None },
            "cora" => Row { leak: 0.05, p_drop: 0.5, k: 6, beta: 0.8, self_loops: true, epochs: 100, lr: 0.01, lr_drop: Some(50), wd: 5e-4, lambda: 0.5, early: Some(10) },
            "pubmed" => Row { leak: 0.1, p_drop: 0.3, k: 8, beta: 0.85, self_loops: false, epochs: 300, lr: 0.03, lr_drop: Some(100), wd: 5e-4, lambda: 0.5, early: Some(30) },
            "amazon-comp" => Row { leak: 0.01, p_drop: 0.3, k: 2, beta: 0.95, self_loops: false, epochs: 300, lr: 0.03, lr_drop: None, wd: 1e-5, lambda: 0.1, early: None },
            "amazon-photo" => Row { leak: 0.15, p_drop: 0.5, k: 2, beta: 0.95, self_loops: true, epochs: 300, lr: 0.05, lr_drop: None, wd: 2e-7, lambda: 0.1, early: Some(20) },
            "coauthor-cs" => Row { leak: 0.01, p_drop: 0.3, k: 4, beta: 0.8, self_loops: false, epochs: 100, lr: 0.02, lr_drop: None, wd: 1e-6, lambda: 0.7, early: Some(20) },
            "coauthor-phy" => Row { leak: 0.01, p_drop: 0.3, k: 6, beta: 0.8, self_loops: false, epochs: 200, lr: 0.02, lr_drop: None, wd: 1e-6, lambda: 0.7, early: Some(20) },
            _ => return Err(Error::invalid(format!("unknown preset '{name}'; expected one of {}", PRESETS.join(", ")))),
        };
        Ok(ExperimentConfig {
            hidden: 64,
            k: row.k,
            beta: row.beta,
            leak_slope: row.leak,
            p_drop: row.p_drop,
            self_loops: row.self_loops,
            epochs: row.epochs,
            lr0: row.lr,
            lr_drop_every: row.lr_drop,
            lr_drop_factor: 0.5,
            weight_decay: row.wd,
            lambda_ent: row.lambda,
            early_stop_window: row.early,
            ..ExperimentConfig::default()
        })
    }

    /// Sets one field from its textual form. Keys are case-insensitive and
    /// accept `-` in place of `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match normalize_key(key).replace('-', "_").as_str() {
            "aggregator" => self.aggregator = value.parse()?,
            "hidden" => self.hidden = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "leak_slope" => self.leak_slope = parse(key, value)?,
            "p_drop" => self.p_drop = parse(key, value)?,
            "self_loops" => self.self_loops = parse_flag(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "lr" | "lr0" => self.lr0 = parse(key, value)?,
            "lr_drop_every" => self.lr_drop_every = parse_optional(key, value)?,
            "lr_drop_factor" => self.lr_drop_factor = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "decay_biases" => self.decay_biases = parse_flag(key, value)?,
            "lambda_ent" => self.lambda_ent = parse(key, value)?,
            "entropy_reduction" => self.entropy_reduction = value.parse()?,
            "early_stop_window" | "early_stop" => self.early_stop_window = parse_optional(key, value)?,
            "early_stop_metric" => self.early_stop_metric = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "detach_transition" => self.detach_transition = parse_flag(key, value)?,
            "ppr_alpha" => self.ppr_alpha = parse(key, value)?,
            "heat_t" => self.heat_t = parse(key, value)?,
            "series_steps" => self.series_steps = parse(key, value)?,
            "normalize_features" => self.normalize_features = parse_flag(key, value)?,
            _ => return Err(Error::invalid(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn is_key(key: &str) -> bool {
        let k = normalize_key(key).replace('-', "_");
        KEYS.contains(&k.as_str()) || matches!(k.as_str(), "lr0" | "early_stop")
    }

    /// Current value of every key in [`KEYS`] order, in the form [`set`](Self::set) accepts.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<usize>| v.map_or_else(|| "none".to_string(), |x| x.to_string());
        let flag = |b: bool| if b { "on".to_string() } else { "off".to_string() };
        vec![
            ("aggregator", self.aggregator.to_string()),
            ("hidden", self.hidden.to_string()),
            ("k", self.k.to_string()),
            ("beta", self.beta.to_string()),
            ("leak_slope", self.leak_slope.to_string()),
            ("p_drop", self.p_drop.to_string()),
            ("self_loops", flag(self.self_loops)),
            ("epochs", self.epochs.to_string()),
            ("lr", self.lr0.to_string()),
            ("lr_drop_every", opt(self.lr_drop_every)),
            ("lr_drop_factor", self.lr_drop_factor.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("decay_biases", flag(self.decay_biases)),
            ("lambda_ent", self.lambda_ent.to_string()),
            ("entropy_reduction", self.entropy_reduction.to_string()),
            ("early_stop_window", opt(self.early_stop_window)),
            ("early_stop_metric", self.early_stop_metric.to_string()),
            ("seed", self.seed.to_string()),
            ("detach_transition", flag(self.detach_transition)),
            ("ppr_alpha", self.ppr_alpha.to_string()),
            ("heat_t", self.heat_t.to_string()),
            ("series_steps", self.series_steps.to_string()),
            ("normalize_features", flag(self.normalize_features)),
        ]
    }

    /// Applies `key=value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("config line {}: expected key=value", lineno + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| Error::invalid(format!("config line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    /// Learning rate in effect at zero-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_drop_every {
            Some(every) if every > 0 => {
                let drops = (epoch / every) as i32;
                self.lr0 * self.lr_drop_factor.powi(drops)
            }
            _ => self.lr0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fraction = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {v} outside [0, 1]")))
            }
        };
        fraction("beta", self.beta)?;
        fraction("lr_drop_factor", self.lr_drop_factor)?;
        fraction("ppr_alpha", self.ppr_alpha)?;
        if !(0.0..1.0).contains(&self.leak_slope) {
            return Err(Error::invalid(format!("leak_slope = {} outside [0, 1)", self.leak_slope)));
        }
        if !(0.0..1.0).contains(&self.p_drop) {
            return Err(Error::invalid(format!("p_drop = {} outside [0, 1)", self.p_drop)));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(Error::invalid("hidden must be at least 1"));
        }
        if !(self.lr0 > 0.0) {
            return Err(Error::invalid(format!("lr = {} must be positive", self.lr0)));
        }
        if self.weight_decay < 0.0 || self.lambda_ent < 0.0 {
            return Err(Error::invalid("weight_decay and lambda_ent must be non-negative"));
        }
        if self.aggregator == Aggregator::Ppr && self.ppr_alpha == 0.0 {
            return Err(Error::invalid("ppr_alpha must be positive"));
        }
        if self.aggregator == Aggregator::Hk && (!(self.heat_t > 0.0) || self.series_steps == 0) {
            return Err(Error::invalid("heat kernel needs heat_t > 0 and series_steps >= 1"));
        }
        if self.early_stop_window == Some(0) {
            return Err(Error::invalid("early_stop_window must be at least 1 (use none to disable)"));
        }
        Ok(())
    }

    /// Short stable digest of the resolved configuration. The seed is left
    /// out so that repeated runs of one configuration share a digest.
    pub fn hash(&self) -> String {
        let canonical = self
            .fields()
            .into_iter()
            .filter(|(k, _)| *k != "seed")
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        // FNV-1a; only needs to be stable across platforms, not collision resistant.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in canonical.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

fn normalize_key(s: &str) -> String {
    s.trim().to_ascii_lowercase()
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("cannot parse '{value}' for {key}")))
}

fn parse_flag(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" | "o" => Ok(true),
        "off" | "false" | "no" | "0" | "x" => Ok(false),
        _ => Err(Error::invalid(format!("cannot parse '{value}' as on/off for {key}"))),
    }
}

fn parse_optional(key: &str, value: &str) -> Result<Option<usize>> {
    match value.to_ascii_lowercase().as_str() {
        "none" | "-" | "" | "off" => Ok(None),
        _ => parse(key, value).map(Some),
    }
}
