//! Transition operators and K-step feature propagation.
//!
//! Rows of a transition matrix with no entries (isolated nodes without a
//! self-loop) act as the identity during propagation: the walker stays put.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{SparseValues, Tape, Value};
use crate::graph::SparseGraph;
use crate::{Error, Result};

/// Tolerance used to validate probability rows fed to the class-attentive transition.
pub const PROB_ROW_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionKind {
    Cad,
    Rw,
    SymNa,
}

impl fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransitionKind::Cad => "cad",
            TransitionKind::Rw => "rw",
            TransitionKind::SymNa => "symna",
        })
    }
}

#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    pub kind: TransitionKind,
    pub values: SparseValues,
}

impl TransitionMatrix {
    pub fn pattern(&self) -> &Arc<SparseGraph> {
        self.values.pattern()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DiffusionResult {
    pub features: Value,
    pub steps: usize,
}

/// Class-attentive transition: softmax over each row's neighbors of `p_i . p_j`.
///
/// `p` holds one class-probability row per node and stays differentiable.
pub fn cad_transition(tape: &mut Tape, g: &Arc<SparseGraph>, p: Value) -> Result<TransitionMatrix> {
    if p.rows() != g.n_nodes() {
        return Err(Error::shape("cad_transition", (g.n_nodes(), p.cols()), p.shape()));
    }
    check_probability_rows(tape, p)?;
    let logits = tape.edge_dot(g, p)?;
    let values = tape.segment_softmax(&logits);
    Ok(TransitionMatrix { kind: TransitionKind::Cad, values })
}

/// `D^-1 A` (`Rw`) or `D^-1/2 A D^-1/2` (`SymNa`) as constant edge values.
pub fn baseline_transition(tape: &mut Tape, g: &Arc<SparseGraph>, kind: TransitionKind) -> Result<TransitionMatrix> {
    let values = match kind {
        TransitionKind::Rw => rw_values(g),
        TransitionKind::SymNa => symna_values(g),
        TransitionKind::Cad => {
            return Err(Error::invalid("the class-attentive transition needs class likelihoods"));
        }
    };
    let values = tape.sparse_constant(Arc::clone(g), values)?;
    Ok(TransitionMatrix { kind, values })
}

pub fn rw_values(g: &SparseGraph) -> Vec<f64> {
    let mut out = Vec::with_capacity(g.nnz());
    for i in 0..g.n_nodes() {
        let d = g.row_range(i).len();
        out.extend(std::iter::repeat(1.0 / d as f64).take(d));
    }
    out
}

pub fn symna_values(g: &SparseGraph) -> Vec<f64> {
    let inv_sqrt: Vec<f64> = (0..g.n_nodes())
        .map(|i| {
            let d = g.row_range(i).len();
            if d == 0 {
                0.0
            } else {
                1.0 / (d as f64).sqrt()
            }
        })
        .collect();
    let mut out = Vec::with_capacity(g.nnz());
    for i in 0..g.n_nodes() {
        out.extend(g.row(i).iter().map(|&j| inv_sqrt[i] * inv_sqrt[j]));
    }
    out
}

/// `k` applications of `t`: returns `T^k z`.
pub fn propagate(tape: &mut Tape, t: &TransitionMatrix, z: Value, k: usize) -> Result<DiffusionResult> {
    let mut h = z;
    for _ in 0..k {
        h = tape.spmm_hold_empty(&t.values, h)?;
    }
    Ok(DiffusionResult { features: h, steps: k })
}

/// Truncated personalized-PageRank iteration
/// `H <- (1 - alpha) T_rw H + alpha z`, starting from `H = z`.
pub fn ppr_diffuse(tape: &mut Tape, g: &Arc<SparseGraph>, z: Value, alpha: f64, k: usize) -> Result<DiffusionResult> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("teleport fraction {alpha} outside (0, 1]")));
    }
    let t = baseline_transition(tape, g, TransitionKind::Rw)?;
    let teleport = tape.scale(z, alpha);
    let mut h = z;
    for _ in 0..k {
        let walked = tape.spmm_hold_empty(&t.values, h)?;
        let walked = tape.scale(walked, 1.0 - alpha);
        h = tape.add(walked, teleport)?;
    }
    Ok(DiffusionResult { features: h, steps: k })
}

/// Heat-kernel series `sum_{m=0}^{k} e^-t t^m / m! T_rw^m z`.
pub fn heat_diffuse(tape: &mut Tape, g: &Arc<SparseGraph>, z: Value, t_heat: f64, k: usize) -> Result<DiffusionResult> {
    if !(t_heat > 0.0) {
        return Err(Error::invalid(format!("diffusion time {t_heat} must be positive")));
    }
    if k == 0 {
        return Err(Error::invalid("heat kernel needs at least one series term"));
    }
    let t = baseline_transition(tape, g, TransitionKind::Rw)?;
    let coeffs = heat_coefficients(t_heat, k);
    let mut power = z;
    let mut acc = tape.scale(z, coeffs[0]);
    for &c in &coeffs[1..] {
        power = tape.spmm_hold_empty(&t.values, power)?;
        let term = tape.scale(power, c);
        acc = tape.add(acc, term)?;
    }
    Ok(DiffusionResult { features: acc, steps: k })
}

/// Poisson weights `e^-t t^m / m!` for `m = 0..=k`.
pub fn heat_coefficients(t_heat: f64, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k + 1);
    let mut c = (-t_heat).exp();
    out.push(c);
    for m in 1..=k {
        c *= t_heat / m as f64;
        out.push(c);
    }
    out
}

fn check_probability_rows(tape: &Tape, p: Value) -> Result<()> {
    let pd = tape.value(p);
    for i in 0..pd.rows() {
        let row = pd.row(i);
        let total: f64 = row.iter().sum();
        if row.iter().any(|&v| v < 0.0 || !v.is_finite()) || (total - 1.0).abs() > PROB_ROW_TOL {
            return Err(Error::invalid(format!("row {i} of class likelihoods is not a probability vector")));
        }
    }
    Ok(())
}
