//! Full-batch training with Adam, learning-rate schedule and early stopping.

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor};
use crate::config::{ExperimentConfig, StopMetric};
use crate::data::{Dataset, Split};
use crate::graph::SparseGraph;
use crate::model::{forward, loss, ModelParams};
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates for a list of tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    steps: u64,
}

impl AdamState {
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        AdamState {
            m: shapes.iter().map(|&(r, c)| Tensor::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| Tensor::zeros(r, c)).collect(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// One Adam update. `weight_decay[k]` is added as an L2 gradient term to tensor `k`.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    lr: f64,
    weight_decay: &[f64],
) -> Result<()> {
    if params.len() != state.m.len() || grads.len() != params.len() || weight_decay.len() != params.len() {
        return Err(Error::invalid(format!(
            "adam_step got {} params, {} grads, {} decays for {} state slots",
            params.len(),
            grads.len(),
            weight_decay.len(),
            state.m.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::shape("adam_step", p.shape(), g.shape()));
        }
    }
    for (k, p) in params.iter().enumerate() {
        if p.shape() != state.m[k].shape() {
            return Err(Error::shape("adam_step state", p.shape(), state.m[k].shape()));
        }
    }

    state.steps += 1;
    let t = state.steps as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    for (k, p) in params.iter_mut().enumerate() {
        let wd = weight_decay[k];
        let m = state.m[k].data_mut();
        let v = state.v[k].data_mut();
        for (idx, w) in p.data_mut().iter_mut().enumerate() {
            let g = grads[k].data()[idx] + wd * *w;
            m[idx] = ADAM_BETA1 * m[idx] + (1.0 - ADAM_BETA1) * g;
            v[idx] = ADAM_BETA2 * v[idx] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = m[idx] / bc1;
            let v_hat = v[idx] / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

/// Fraction of `mask` nodes whose argmax prediction equals the label.
pub fn evaluate(probs: &Tensor, labels: &[usize], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::Empty("evaluation mask"));
    }
    let mut correct = 0usize;
    for &i in mask {
        if i >= probs.rows() || i >= labels.len() {
            return Err(Error::IndexOutOfRange { what: "evaluation node", index: i, len: probs.rows() });
        }
        if probs.argmax_row(i) == labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / mask.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub test_accuracy: f64,
    pub best_val_epoch: usize,
    pub best_val_accuracy: f64,
    pub best_val_loss: f64,
    pub val_curve: Vec<EpochRecord>,
    pub wall_clock_ms: u64,
    /// Per-node blend weights at the selected checkpoint (AdaCAD only).
    pub gamma_values: Vec<f64>,
    pub optimizer_steps: u64,
    pub best_params: ModelParams,
}

struct Snapshot {
    epoch: usize,
    val_acc: f64,
    val_loss: f64,
    test_acc: f64,
    gamma: Vec<f64>,
    params: ModelParams,
}

impl Snapshot {
    fn beaten_by(&self, acc: f64, loss: f64, metric: StopMetric) -> bool {
        match metric {
            StopMetric::Acc => acc > self.val_acc || (acc == self.val_acc && loss < self.val_loss),
            StopMetric::Loss => loss < self.val_loss || (loss == self.val_loss && acc > self.val_acc),
        }
    }
}

/// Trains on a dataset with the given split.
pub fn train_dataset(d: &Dataset, split: &Split, cfg: &ExperimentConfig) -> Result<RunResult> {
    train(&d.graph, &d.features.matrix, &d.labels, d.n_classes, split, cfg)
}

/// Trains one model from scratch and reports test accuracy at the best
/// validation checkpoint.
///
/// `graph` is taken without self-loops; the configuration decides whether
/// they are added.
pub fn train(
    graph: &SparseGraph,
    features: &CsrMatrix,
    labels: &[usize],
    n_classes: usize,
    split: &Split,
    cfg: &ExperimentConfig,
) -> Result<RunResult> {
    let started = Instant::now();
    cfg.validate()?;
    let n = graph.n_nodes();
    if features.rows() != n || labels.len() != n {
        return Err(Error::shape("train inputs", features.shape(), (labels.len(), n)));
    }
    split.validate(n)?;
    for (part, ids) in [("training set", &split.train), ("validation set", &split.val), ("test set", &split.test)] {
        if ids.is_empty() {
            return Err(Error::Empty(part));
        }
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::invalid(format!("label {y} >= {n_classes} classes")));
    }

    let graph = Arc::new(graph.with_self_loops(cfg.self_loops));
    let x = Arc::new(if cfg.normalize_features { features.l1_normalize_rows() } else { features.clone() });
    let labeled = |ids: &[usize]| ids.iter().map(|&i| (i, labels[i])).collect::<Vec<_>>();
    let train_set = labeled(&split.train);
    let val_set = labeled(&split.val);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(x.cols(), cfg.hidden, n_classes, &mut rng);
    let shapes: Vec<_> = params.tensors().iter().map(|t| t.shape()).collect();
    let mut adam = AdamState::new(&shapes);
    let decays: Vec<f64> = ModelParams::IS_BIAS
        .iter()
        .map(|&bias| if bias && !cfg.decay_biases { 0.0 } else { cfg.weight_decay })
        .collect();

    let mut best: Option<Snapshot> = None;
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut since_best = 0usize;
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        let mut tape = Tape::new();
        let out = forward(&mut tape, &params, &x, &graph, cfg, true, &mut rng)?;
        let l = loss(&mut tape, &out, &train_set, cfg.lambda_ent, cfg.entropy_reduction)?;
        let train_loss = tape.value(l).item();
        let grads = tape.backward(l)?;
        let grads: Vec<Tensor> = out.params.as_array().iter().map(|&v| grads.get_or_zeros(v)).collect();
        adam_step(&mut params.tensors_mut(), &grads, &mut adam, lr, &decays)?;

        let mut tape = Tape::new();
        let out = forward(&mut tape, &params, &x, &graph, cfg, false, &mut rng)?;
        let vl = tape.masked_nll(out.y_hat, &val_set)?;
        let val_loss = tape.value(vl).item();
        let probs = tape.value(out.y_hat);
        let val_accuracy = evaluate(probs, labels, &split.val)?;
        curve.push(EpochRecord { epoch, lr, train_loss, val_loss, val_accuracy });

        if best.as_ref().is_none_or(|b| b.beaten_by(val_accuracy, val_loss, cfg.early_stop_metric)) {
            best = Some(Snapshot {
                epoch,
                val_acc: val_accuracy,
                val_loss,
                test_acc: evaluate(probs, labels, &split.test)?,
                gamma: out.gamma.map(|g| tape.value(g.gamma).data().to_vec()).unwrap_or_default(),
                params: params.clone(),
            });
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.early_stop_window.is_some_and(|w| since_best >= w) {
                break;
            }
        }
    }

    let best = best.expect("at least one epoch runs");
    Ok(RunResult {
        test_accuracy: best.test_acc,
        best_val_epoch: best.epoch,
        best_val_accuracy: best.val_acc,
        best_val_loss: best.val_loss,
        val_curve: curve,
        wall_clock_ms: started.elapsed().as_millis() as u64,
        gamma_values: best.gamma,
        optimizer_steps: adam.steps(),
        best_params: best.params,
    })
}
