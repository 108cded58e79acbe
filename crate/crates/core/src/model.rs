//! The full network: a two-layer MLP producing class scores, an aggregation
//! stage driven by the MLP's own class likelihoods, and a softmax classifier.
//!
//! ```text
//! z      = W2 . drop(lrelu(W1 . drop(x) + b1)) + b2
//! p      = softmax(z)                          (pre-diffusion likelihoods)
//! z_agg  = aggregate(z; graph, p)              (AdaCAD by default)
//! y_hat  = softmax(z_agg)
//! ```

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adacad::{adaptive_blend, control_variable, gamma_vector, GammaVector};
use crate::autodiff::{Tape, Tensor, Value};
use crate::config::{Aggregator, EntropyReduction, ExperimentConfig};
use crate::diffusion::{baseline_transition, cad_transition, heat_diffuse, ppr_diffuse, propagate, TransitionKind};
use crate::graph::SparseGraph;
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

/// Handles of the parameter leaves on one tape.
#[derive(Debug, Clone, Copy)]
pub struct ParamValues {
    pub w1: Value,
    pub b1: Value,
    pub w2: Value,
    pub b2: Value,
}

impl ParamValues {
    pub fn as_array(&self) -> [Value; 4] {
        [self.w1, self.b1, self.w2, self.b2]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardOutputs {
    pub params: ParamValues,
    pub z: Value,
    pub p: Value,
    pub z_agg: Value,
    pub y_hat: Value,
    pub gamma: Option<GammaVector>,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(n_features: usize, hidden: usize, n_classes: usize, rng: &mut R) -> Self {
        ModelParams {
            w1: glorot(n_features, hidden, rng),
            b1: Tensor::zeros(1, hidden),
            w2: glorot(hidden, n_classes, rng),
            b2: Tensor::zeros(1, n_classes),
        }
    }

    pub fn tensors(&self) -> [&Tensor; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub const NAMES: [&'static str; 4] = ["w1", "b1", "w2", "b2"];

    /// Which tensors are biases, aligned with [`tensors`](Self::tensors).
    pub const IS_BIAS: [bool; 4] = [false, true, false, true];

    pub fn n_features(&self) -> usize {
        self.w1.rows()
    }

    pub fn n_classes(&self) -> usize {
        self.w2.cols()
    }

    fn check(&self) -> Result<()> {
        let h = self.w1.cols();
        if self.b1.shape() != (1, h) || self.w2.rows() != h || self.b2.shape() != (1, self.w2.cols()) {
            return Err(Error::Checkpoint(format!(
                "inconsistent shapes w1 {:?} b1 {:?} w2 {:?} b2 {:?}",
                self.w1.shape(),
                self.b1.shape(),
                self.w2.shape(),
                self.b2.shape()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.to_string(),
            tensors: Self::NAMES
                .iter()
                .zip(self.tensors())
                .map(|(name, t)| NamedTensor {
                    name: (*name).to_string(),
                    rows: t.rows(),
                    cols: t.cols(),
                    data: t.data().to_vec(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format '{}'", file.format)));
        }
        let mut found: [Option<Tensor>; 4] = Default::default();
        for t in file.tensors {
            let slot = Self::NAMES
                .iter()
                .position(|n| *n == t.name)
                .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor '{}'", t.name)))?;
            let tensor = Tensor::new(t.rows, t.cols, t.data).map_err(|e| Error::Checkpoint(e.to_string()))?;
            if found[slot].replace(tensor).is_some() {
                return Err(Error::Checkpoint(format!("duplicate tensor '{}'", t.name)));
            }
        }
        let [w1, b1, w2, b2] = found;
        let missing = |n: &str| Error::Checkpoint(format!("missing tensor '{n}'"));
        let params = ModelParams {
            w1: w1.ok_or_else(|| missing("w1"))?,
            b1: b1.ok_or_else(|| missing("b1"))?,
            w2: w2.ok_or_else(|| missing("w2"))?,
            b2: b2.ok_or_else(|| missing("b2"))?,
        };
        params.check()?;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }
}

const CHECKPOINT_FORMAT: &str = "cadnet-params v1";

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    tensors: Vec<NamedTensor>,
}

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::new(fan_in, fan_out, data).expect("sized by construction")
}

/// Runs the network on one tape.
///
/// `graph` must already follow the configuration's self-loop policy.
pub fn forward<R: Rng + ?Sized>(
    tape: &mut Tape,
    params: &ModelParams,
    x: &Arc<CsrMatrix>,
    graph: &Arc<SparseGraph>,
    cfg: &ExperimentConfig,
    training: bool,
    rng: &mut R,
) -> Result<ForwardOutputs> {
    if x.cols() != params.n_features() {
        return Err(Error::shape("forward features", x.shape(), params.w1.shape()));
    }
    let pv = ParamValues {
        w1: tape.param(params.w1.clone()),
        b1: tape.param(params.b1.clone()),
        w2: tape.param(params.w2.clone()),
        b2: tape.param(params.b2.clone()),
    };
    forward_values(tape, pv, x, graph, cfg, training, rng)
}

/// [`forward`] on parameters that already live on the tape.
pub fn forward_values<R: Rng + ?Sized>(
    tape: &mut Tape,
    pv: ParamValues,
    x: &Arc<CsrMatrix>,
    graph: &Arc<SparseGraph>,
    cfg: &ExperimentConfig,
    training: bool,
    rng: &mut R,
) -> Result<ForwardOutputs> {
    if x.rows() != graph.n_nodes() {
        return Err(Error::shape("forward graph", x.shape(), (graph.n_nodes(), graph.n_nodes())));
    }
    if !(0.0..=1.0).contains(&cfg.beta) {
        return Err(Error::invalid(format!("beta {} outside [0, 1]", cfg.beta)));
    }

    let x_in = if training && cfg.p_drop > 0.0 { Arc::new(x.dropout(cfg.p_drop, rng)) } else { Arc::clone(x) };
    let h = tape.sparse_matmul(x_in, pv.w1)?;
    let h = tape.add_bias(h, pv.b1)?;
    let h = tape.leaky_relu(h, cfg.leak_slope)?;
    let h = tape.dropout(h, cfg.p_drop, training, rng)?;
    let z = tape.matmul(h, pv.w2)?;
    let z = tape.add_bias(z, pv.b2)?;

    let p = tape.row_softmax(z);
    let p_guide = if cfg.detach_transition { tape.detach(p) } else { p };

    let mut gamma = None;
    let z_agg = match cfg.aggregator {
        Aggregator::AdaCad => {
            let t = cad_transition(tape, graph, p_guide)?;
            let z_cad = propagate(tape, &t, z, cfg.k)?.features;
            let c = control_variable(tape, graph, p_guide)?;
            let g = gamma_vector(tape, c, cfg.beta)?;
            gamma = Some(g);
            adaptive_blend(tape, z, z_cad, &g)?
        }
        Aggregator::CadOnly => {
            let t = cad_transition(tape, graph, p_guide)?;
            propagate(tape, &t, z, cfg.k)?.features
        }
        Aggregator::Rw | Aggregator::SymNa => {
            let kind = if cfg.aggregator == Aggregator::Rw { TransitionKind::Rw } else { TransitionKind::SymNa };
            let t = baseline_transition(tape, graph, kind)?;
            propagate(tape, &t, z, cfg.k)?.features
        }
        Aggregator::Ppr => ppr_diffuse(tape, graph, z, cfg.ppr_alpha, cfg.series_steps)?.features,
        Aggregator::Hk => heat_diffuse(tape, graph, z, cfg.heat_t, cfg.series_steps)?.features,
        Aggregator::None => z,
    };
    let y_hat = tape.row_softmax(z_agg);

    Ok(ForwardOutputs { params: pv, z, p, z_agg, y_hat, gamma })
}

/// Mean cross-entropy over `labeled` `(node, class)` pairs plus
/// `lambda_ent` times the entropy of the pre-diffusion likelihoods.
pub fn loss(
    tape: &mut Tape,
    out: &ForwardOutputs,
    labeled: &[(usize, usize)],
    lambda_ent: f64,
    reduction: EntropyReduction,
) -> Result<Value> {
    let sup = tape.masked_nll(out.y_hat, labeled)?;
    if lambda_ent == 0.0 {
        return Ok(sup);
    }
    let scale = match reduction {
        EntropyReduction::Mean => lambda_ent / out.p.rows() as f64,
        EntropyReduction::Sum => lambda_ent,
    };
    let ent = tape.entropy(out.p, scale);
    tape.add(sup, ent)
}
