//! Define-by-run reverse-mode differentiation over dense matrices and
//! edge-aligned sparse operators.
//!
//! A [`Tape`] records every operation of one forward pass. Operations return
//! [`Value`] handles, which are cheap to copy and only meaningful on the tape
//! that produced them. [`Tape::backward`] sweeps the tape in reverse and
//! returns a [`Gradients`] map holding the gradient of every node that
//! depends on a parameter leaf.
//!
//! Sparse operators live on the pattern of a [`SparseGraph`]: their values
//! are stored as an `(nnz, 1)` column aligned with `col_indices`.

use std::sync::Arc;

use rand::Rng;

use crate::graph::SparseGraph;
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Floor applied to probabilities before taking logarithms.
pub const LOG_EPS: f64 = 1e-12;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape("tensor", (rows, cols), (data.len(), 1)));
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Tensor { rows, cols, data: vec![v; rows * cols] }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { rows: 1, cols: 1, data: vec![v] }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        Ok(Tensor { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Index of the largest entry of row `r`, lowest index on ties.
    pub fn argmax_row(&self, r: usize) -> usize {
        let row = self.row(r);
        let mut best = 0;
        for (c, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = c;
            }
        }
        best
    }

    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Value {
    id: usize,
    rows: usize,
    cols: usize,
}

impl Value {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

/// Edge-aligned values on a graph pattern.
#[derive(Debug, Clone)]
pub struct SparseValues {
    pattern: Arc<SparseGraph>,
    values: Value,
}

impl SparseValues {
    pub fn pattern(&self) -> &Arc<SparseGraph> {
        &self.pattern
    }

    pub fn values(&self) -> Value {
        self.values
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    SparseMatMul { x: Arc<CsrMatrix>, w: usize },
    AddBias(usize, usize),
    Add(usize, usize),
    Affine(usize, f64),
    LeakyRelu(usize, f64),
    Dropout(usize, Vec<f64>),
    RowSoftmax(usize),
    EdgeDot { p: usize, pattern: Arc<SparseGraph> },
    SegmentSoftmax { logits: usize, pattern: Arc<SparseGraph> },
    SegmentMean { values: usize, pattern: Arc<SparseGraph> },
    Spmm { t: usize, x: usize, pattern: Arc<SparseGraph>, hold_empty_rows: bool },
    Blend { z: usize, z_agg: usize, gamma: usize },
    Sum(usize),
    MaskedNll { probs: usize, targets: Vec<(usize, usize)> },
    Entropy { p: usize, scale: f64 },
}

#[derive(Debug)]
struct Node {
    data: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Record of one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by node.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Value) -> Option<&Tensor> {
        self.grads.get(v.id).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros when nothing flowed into it.
    pub fn get_or_zeros(&self, v: Value) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(v.rows, v.cols))
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, data: Tensor, op: Op, requires_grad: bool) -> Value {
        let v = Value { id: self.nodes.len(), rows: data.rows, cols: data.cols };
        self.nodes.push(Node { data, op, requires_grad });
        v
    }

    fn needs(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, data: Tensor) -> Value {
        self.push(data, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, data: Tensor) -> Value {
        self.push(data, Op::Leaf, false)
    }

    /// Copies `v` into a fresh constant leaf, cutting the gradient path.
    pub fn detach(&mut self, v: Value) -> Value {
        let data = self.nodes[v.id].data.clone();
        self.constant(data)
    }

    pub fn value(&self, v: Value) -> &Tensor {
        &self.nodes[v.id].data
    }

    pub fn requires_grad(&self, v: Value) -> bool {
        self.nodes[v.id].requires_grad
    }

    pub fn sparse_param(&mut self, pattern: Arc<SparseGraph>, values: Vec<f64>) -> Result<SparseValues> {
        self.sparse_leaf(pattern, values, true)
    }

    pub fn sparse_constant(&mut self, pattern: Arc<SparseGraph>, values: Vec<f64>) -> Result<SparseValues> {
        self.sparse_leaf(pattern, values, false)
    }

    fn sparse_leaf(&mut self, pattern: Arc<SparseGraph>, values: Vec<f64>, grad: bool) -> Result<SparseValues> {
        if values.len() != pattern.nnz() {
            return Err(Error::shape("sparse values", (pattern.nnz(), 1), (values.len(), 1)));
        }
        let t = Tensor::new(values.len(), 1, values)?;
        let values = self.push(t, Op::Leaf, grad);
        Ok(SparseValues { pattern, values })
    }

    pub fn matmul(&mut self, a: Value, b: Value) -> Result<Value> {
        if a.cols != b.rows {
            return Err(Error::shape("matmul", a.shape(), b.shape()));
        }
        let (n, k, m) = (a.rows, a.cols, b.cols);
        let mut out = vec![0.0; n * m];
        {
            let ad = &self.nodes[a.id].data.data;
            let bd = &self.nodes[b.id].data.data;
            for i in 0..n {
                let orow = &mut out[i * m..(i + 1) * m];
                for (kk, &av) in ad[i * k..(i + 1) * k].iter().enumerate() {
                    if av == 0.0 {
                        continue;
                    }
                    for (o, &bv) in orow.iter_mut().zip(&bd[kk * m..(kk + 1) * m]) {
                        *o += av * bv;
                    }
                }
            }
        }
        let rg = self.needs(&[a.id, b.id]);
        Ok(self.push(Tensor { rows: n, cols: m, data: out }, Op::MatMul(a.id, b.id), rg))
    }

    /// Product of a constant sparse matrix with a dense value.
    pub fn sparse_matmul(&mut self, x: Arc<CsrMatrix>, w: Value) -> Result<Value> {
        if x.cols() != w.rows {
            return Err(Error::shape("sparse_matmul", x.shape(), w.shape()));
        }
        let m = w.cols;
        let mut out = vec![0.0; x.rows() * m];
        {
            let wd = &self.nodes[w.id].data.data;
            for r in 0..x.rows() {
                let orow = &mut out[r * m..(r + 1) * m];
                for (c, v) in x.row(r) {
                    for (o, &wv) in orow.iter_mut().zip(&wd[c * m..(c + 1) * m]) {
                        *o += v * wv;
                    }
                }
            }
        }
        let rg = self.needs(&[w.id]);
        let rows = x.rows();
        Ok(self.push(Tensor { rows, cols: m, data: out }, Op::SparseMatMul { x, w: w.id }, rg))
    }

    /// Adds a `1 x cols` row vector to every row.
    pub fn add_bias(&mut self, a: Value, bias: Value) -> Result<Value> {
        if bias.rows != 1 || bias.cols != a.cols {
            return Err(Error::shape("add_bias", a.shape(), bias.shape()));
        }
        let bd = self.nodes[bias.id].data.data.clone();
        let mut data = self.nodes[a.id].data.data.clone();
        for row in data.chunks_mut(a.cols.max(1)) {
            for (x, b) in row.iter_mut().zip(&bd) {
                *x += b;
            }
        }
        let rg = self.needs(&[a.id, bias.id]);
        Ok(self.push(Tensor { rows: a.rows, cols: a.cols, data }, Op::AddBias(a.id, bias.id), rg))
    }

    pub fn add(&mut self, a: Value, b: Value) -> Result<Value> {
        if a.shape() != b.shape() {
            return Err(Error::shape("add", a.shape(), b.shape()));
        }
        let data = self.nodes[a.id]
            .data
            .data
            .iter()
            .zip(&self.nodes[b.id].data.data)
            .map(|(x, y)| x + y)
            .collect();
        let rg = self.needs(&[a.id, b.id]);
        Ok(self.push(Tensor { rows: a.rows, cols: a.cols, data }, Op::Add(a.id, b.id), rg))
    }

    /// Elementwise `scale * a + shift`.
    pub fn affine(&mut self, a: Value, scale: f64, shift: f64) -> Value {
        let data = self.nodes[a.id].data.data.iter().map(|x| scale * x + shift).collect();
        let rg = self.needs(&[a.id]);
        self.push(Tensor { rows: a.rows, cols: a.cols, data }, Op::Affine(a.id, scale), rg)
    }

    pub fn scale(&mut self, a: Value, s: f64) -> Value {
        self.affine(a, s, 0.0)
    }

    pub fn leaky_relu(&mut self, x: Value, slope: f64) -> Result<Value> {
        if !(0.0..1.0).contains(&slope) {
            return Err(Error::invalid(format!("leaky_relu slope {slope} outside [0, 1)")));
        }
        let data = self.nodes[x.id]
            .data
            .data
            .iter()
            .map(|&v| if v > 0.0 { v } else { slope * v })
            .collect();
        let rg = self.needs(&[x.id]);
        Ok(self.push(Tensor { rows: x.rows, cols: x.cols, data }, Op::LeakyRelu(x.id, slope), rg))
    }

    /// Inverted dropout; identity when not training or `p_drop == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Value, p_drop: f64, training: bool, rng: &mut R) -> Result<Value> {
        if !(0.0..1.0).contains(&p_drop) {
            return Err(Error::invalid(format!("dropout probability {p_drop} outside [0, 1)")));
        }
        if !training || p_drop == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p_drop);
        let mask: Vec<f64> = (0..x.rows * x.cols)
            .map(|_| if rng.random::<f64>() < p_drop { 0.0 } else { keep })
            .collect();
        let data = self.nodes[x.id].data.data.iter().zip(&mask).map(|(v, m)| v * m).collect();
        let rg = self.needs(&[x.id]);
        Ok(self.push(Tensor { rows: x.rows, cols: x.cols, data }, Op::Dropout(x.id, mask), rg))
    }

    pub fn row_softmax(&mut self, x: Value) -> Value {
        let mut data = self.nodes[x.id].data.data.clone();
        if x.cols > 0 {
            for row in data.chunks_mut(x.cols) {
                softmax_in_place(row);
            }
        }
        let rg = self.needs(&[x.id]);
        self.push(Tensor { rows: x.rows, cols: x.cols, data }, Op::RowSoftmax(x.id), rg)
    }

    /// Edge logits `p_i . p_j` for every stored entry `(i, j)` of `pattern`.
    pub fn edge_dot(&mut self, pattern: &Arc<SparseGraph>, p: Value) -> Result<SparseValues> {
        if p.rows != pattern.n_nodes() {
            return Err(Error::shape("edge_dot", (pattern.n_nodes(), pattern.n_nodes()), p.shape()));
        }
        let pd = &self.nodes[p.id].data;
        let mut out = Vec::with_capacity(pattern.nnz());
        for i in 0..pattern.n_nodes() {
            let pi = pd.row(i);
            for &j in pattern.row(i) {
                out.push(dot(pi, pd.row(j)));
            }
        }
        let rg = self.needs(&[p.id]);
        let values = self.push(
            Tensor { rows: out.len(), cols: 1, data: out },
            Op::EdgeDot { p: p.id, pattern: Arc::clone(pattern) },
            rg,
        );
        Ok(SparseValues { pattern: Arc::clone(pattern), values })
    }

    /// Softmax over each row's stored entries. Empty rows stay empty.
    pub fn segment_softmax(&mut self, logits: &SparseValues) -> SparseValues {
        let pattern = &logits.pattern;
        let mut data = self.nodes[logits.values.id].data.data.clone();
        for i in 0..pattern.n_nodes() {
            softmax_in_place(&mut data[pattern.row_range(i)]);
        }
        let rg = self.needs(&[logits.values.id]);
        let values = self.push(
            Tensor { rows: data.len(), cols: 1, data },
            Op::SegmentSoftmax { logits: logits.values.id, pattern: Arc::clone(pattern) },
            rg,
        );
        SparseValues { pattern: Arc::clone(pattern), values }
    }

    /// Per-row mean of the stored entries as an `(n, 1)` column. Empty rows give 0.
    pub fn segment_mean(&mut self, values: &SparseValues) -> Value {
        let pattern = &values.pattern;
        let vd = &self.nodes[values.values.id].data.data;
        let data: Vec<f64> = (0..pattern.n_nodes())
            .map(|i| {
                let span = pattern.row_range(i);
                if span.is_empty() {
                    0.0
                } else {
                    let len = span.len() as f64;
                    vd[span].iter().sum::<f64>() / len
                }
            })
            .collect();
        let rg = self.needs(&[values.values.id]);
        self.push(
            Tensor { rows: data.len(), cols: 1, data },
            Op::SegmentMean { values: values.values.id, pattern: Arc::clone(pattern) },
            rg,
        )
    }

    /// Sparse-dense product `T x`. Rows of `T` without entries produce zeros.
    pub fn spmm(&mut self, t: &SparseValues, x: Value) -> Result<Value> {
        self.spmm_impl(t, x, false)
    }

    /// Like [`Tape::spmm`], but rows without entries copy the matching row of
    /// `x`, i.e. an empty row acts as the identity.
    pub fn spmm_hold_empty(&mut self, t: &SparseValues, x: Value) -> Result<Value> {
        self.spmm_impl(t, x, true)
    }

    fn spmm_impl(&mut self, t: &SparseValues, x: Value, hold_empty_rows: bool) -> Result<Value> {
        let pattern = &t.pattern;
        let n = pattern.n_nodes();
        if x.rows != n {
            return Err(Error::shape("spmm", (n, n), x.shape()));
        }
        let f = x.cols;
        let mut out = vec![0.0; n * f];
        {
            let tv = &self.nodes[t.values.id].data.data;
            let xd = &self.nodes[x.id].data.data;
            for i in 0..n {
                let span = pattern.row_range(i);
                let orow = &mut out[i * f..(i + 1) * f];
                if span.is_empty() {
                    if hold_empty_rows {
                        orow.copy_from_slice(&xd[i * f..(i + 1) * f]);
                    }
                    continue;
                }
                for e in span {
                    let j = pattern.col_indices()[e];
                    let w = tv[e];
                    for (o, &xv) in orow.iter_mut().zip(&xd[j * f..(j + 1) * f]) {
                        *o += w * xv;
                    }
                }
            }
        }
        let rg = self.needs(&[t.values.id, x.id]);
        Ok(self.push(
            Tensor { rows: n, cols: f, data: out },
            Op::Spmm { t: t.values.id, x: x.id, pattern: Arc::clone(pattern), hold_empty_rows },
            rg,
        ))
    }

    /// Row-wise `(1 - gamma_i) z_i + gamma_i z_agg_i` with `gamma` an `(n, 1)` column.
    pub fn blend(&mut self, z: Value, z_agg: Value, gamma: Value) -> Result<Value> {
        if z.shape() != z_agg.shape() {
            return Err(Error::shape("blend", z.shape(), z_agg.shape()));
        }
        if gamma.shape() != (z.rows, 1) {
            return Err(Error::shape("blend gamma", (z.rows, 1), gamma.shape()));
        }
        let f = z.cols;
        let zd = &self.nodes[z.id].data.data;
        let ad = &self.nodes[z_agg.id].data.data;
        let gd = &self.nodes[gamma.id].data.data;
        let mut data = Vec::with_capacity(zd.len());
        for i in 0..z.rows {
            let g = gd[i];
            for c in 0..f {
                data.push((1.0 - g) * zd[i * f + c] + g * ad[i * f + c]);
            }
        }
        let rg = self.needs(&[z.id, z_agg.id, gamma.id]);
        Ok(self.push(
            Tensor { rows: z.rows, cols: f, data },
            Op::Blend { z: z.id, z_agg: z_agg.id, gamma: gamma.id },
            rg,
        ))
    }

    pub fn sum(&mut self, a: Value) -> Value {
        let s = self.nodes[a.id].data.data.iter().sum();
        let rg = self.needs(&[a.id]);
        self.push(Tensor::scalar(s), Op::Sum(a.id), rg)
    }

    /// Mean of `-ln(probs[i, c])` over `(i, c)` targets, with the log argument
    /// clamped at [`LOG_EPS`].
    pub fn masked_nll(&mut self, probs: Value, targets: &[(usize, usize)]) -> Result<Value> {
        if targets.is_empty() {
            return Err(Error::Empty("labeled node set"));
        }
        for &(i, c) in targets {
            if i >= probs.rows {
                return Err(Error::IndexOutOfRange { what: "labeled node", index: i, len: probs.rows });
            }
            if c >= probs.cols {
                return Err(Error::IndexOutOfRange { what: "class", index: c, len: probs.cols });
            }
        }
        let pd = &self.nodes[probs.id].data;
        let total: f64 = targets.iter().map(|&(i, c)| -pd.get(i, c).max(LOG_EPS).ln()).sum();
        let loss = total / targets.len() as f64;
        let rg = self.needs(&[probs.id]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::MaskedNll { probs: probs.id, targets: targets.to_vec() },
            rg,
        ))
    }

    /// `scale * sum_i H(p_i)` with `H(p) = -sum_c p_c ln p_c`.
    pub fn entropy(&mut self, p: Value, scale: f64) -> Value {
        let h: f64 = self.nodes[p.id].data.data.iter().map(|&v| -v * v.max(LOG_EPS).ln()).sum();
        let rg = self.needs(&[p.id]);
        self.push(Tensor::scalar(scale * h), Op::Entropy { p: p.id, scale }, rg)
    }

    /// Reverse sweep from a scalar loss.
    pub fn backward(&self, loss: Value) -> Result<Gradients> {
        if loss.shape() != (1, 1) {
            return Err(Error::NonScalarLoss(loss.shape()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        if !self.nodes[loss.id].requires_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.id] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            self.backprop_node(node, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let nodes = &self.nodes;
        let gd = &g.data;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ad, bd) = (&nodes[*a].data, &nodes[*b].data);
                let (n, k, m) = (ad.rows, ad.cols, bd.cols);
                if nodes[*a].requires_grad {
                    // g (n x m) . b^T (m x k)
                    let acc = grad_slot(grads, *a, n, k);
                    for i in 0..n {
                        let grow = &gd[i * m..(i + 1) * m];
                        for kk in 0..k {
                            acc[i * k + kk] += dot(grow, &bd.data[kk * m..(kk + 1) * m]);
                        }
                    }
                }
                if nodes[*b].requires_grad {
                    // a^T (k x n) . g (n x m)
                    let acc = grad_slot(grads, *b, k, m);
                    for i in 0..n {
                        let grow = &gd[i * m..(i + 1) * m];
                        for (kk, &av) in ad.data[i * k..(i + 1) * k].iter().enumerate() {
                            if av == 0.0 {
                                continue;
                            }
                            for (o, &gv) in acc[kk * m..(kk + 1) * m].iter_mut().zip(grow) {
                                *o += av * gv;
                            }
                        }
                    }
                }
            }
            Op::SparseMatMul { x, w } => {
                if nodes[*w].requires_grad {
                    let m = g.cols;
                    let acc = grad_slot(grads, *w, x.cols(), m);
                    for r in 0..x.rows() {
                        let grow = &gd[r * m..(r + 1) * m];
                        for (c, v) in x.row(r) {
                            for (o, &gv) in acc[c * m..(c + 1) * m].iter_mut().zip(grow) {
                                *o += v * gv;
                            }
                        }
                    }
                }
            }
            Op::AddBias(a, b) => {
                if nodes[*a].requires_grad {
                    add_into(grad_slot(grads, *a, g.rows, g.cols), gd);
                }
                if nodes[*b].requires_grad {
                    let acc = grad_slot(grads, *b, 1, g.cols);
                    for row in gd.chunks(g.cols.max(1)) {
                        add_into(acc, row);
                    }
                }
            }
            Op::Add(a, b) => {
                for &src in [a, b] {
                    if nodes[src].requires_grad {
                        add_into(grad_slot(grads, src, g.rows, g.cols), gd);
                    }
                }
            }
            Op::Affine(a, s) => {
                if nodes[*a].requires_grad {
                    let acc = grad_slot(grads, *a, g.rows, g.cols);
                    for (o, &gv) in acc.iter_mut().zip(gd) {
                        *o += s * gv;
                    }
                }
            }
            Op::LeakyRelu(a, slope) => {
                if nodes[*a].requires_grad {
                    let xd = &nodes[*a].data.data;
                    let acc = grad_slot(grads, *a, g.rows, g.cols);
                    for ((o, &gv), &x) in acc.iter_mut().zip(gd).zip(xd) {
                        *o += if x > 0.0 { gv } else { slope * gv };
                    }
                }
            }
            Op::Dropout(a, mask) => {
                if nodes[*a].requires_grad {
                    let acc = grad_slot(grads, *a, g.rows, g.cols);
                    for ((o, &gv), &m) in acc.iter_mut().zip(gd).zip(mask) {
                        *o += m * gv;
                    }
                }
            }
            Op::RowSoftmax(a) => {
                if nodes[*a].requires_grad && g.cols > 0 {
                    let yd = &node.data.data;
                    let acc = grad_slot(grads, *a, g.rows, g.cols);
                    for ((o, gr), yr) in acc.chunks_mut(g.cols).zip(gd.chunks(g.cols)).zip(yd.chunks(g.cols)) {
                        softmax_vjp(o, gr, yr);
                    }
                }
            }
            Op::EdgeDot { p, pattern } => {
                if nodes[*p].requires_grad {
                    let pd = &nodes[*p].data;
                    let c = pd.cols;
                    let acc = grad_slot(grads, *p, pd.rows, c);
                    for i in 0..pattern.n_nodes() {
                        for e in pattern.row_range(i) {
                            let j = pattern.col_indices()[e];
                            let ge = gd[e];
                            for k in 0..c {
                                acc[i * c + k] += ge * pd.data[j * c + k];
                                acc[j * c + k] += ge * pd.data[i * c + k];
                            }
                        }
                    }
                }
            }
            Op::SegmentSoftmax { logits, pattern } => {
                if nodes[*logits].requires_grad {
                    let yd = &node.data.data;
                    let acc = grad_slot(grads, *logits, yd.len(), 1);
                    for i in 0..pattern.n_nodes() {
                        let span = pattern.row_range(i);
                        softmax_vjp(&mut acc[span.clone()], &gd[span.clone()], &yd[span]);
                    }
                }
            }
            Op::SegmentMean { values, pattern } => {
                if nodes[*values].requires_grad {
                    let acc = grad_slot(grads, *values, pattern.nnz(), 1);
                    for i in 0..pattern.n_nodes() {
                        let span = pattern.row_range(i);
                        let share = gd[i] / span.len().max(1) as f64;
                        for o in &mut acc[span] {
                            *o += share;
                        }
                    }
                }
            }
            Op::Spmm { t, x, pattern, hold_empty_rows } => {
                let f = g.cols;
                let cols = pattern.col_indices();
                if nodes[*t].requires_grad {
                    let xd = &nodes[*x].data.data;
                    let acc = grad_slot(grads, *t, pattern.nnz(), 1);
                    for i in 0..pattern.n_nodes() {
                        let grow = &gd[i * f..(i + 1) * f];
                        for e in pattern.row_range(i) {
                            let j = cols[e];
                            acc[e] += dot(grow, &xd[j * f..(j + 1) * f]);
                        }
                    }
                }
                if nodes[*x].requires_grad {
                    let tv = &nodes[*t].data.data;
                    let acc = grad_slot(grads, *x, pattern.n_nodes(), f);
                    for i in 0..pattern.n_nodes() {
                        let span = pattern.row_range(i);
                        if span.is_empty() {
                            if *hold_empty_rows {
                                add_into(&mut acc[i * f..(i + 1) * f], &gd[i * f..(i + 1) * f]);
                            }
                            continue;
                        }
                        for e in span {
                            let j = cols[e];
                            let w = tv[e];
                            for c in 0..f {
                                acc[j * f + c] += w * gd[i * f + c];
                            }
                        }
                    }
                }
            }
            Op::Blend { z, z_agg, gamma } => {
                let f = g.cols;
                let gam = &nodes[*gamma].data.data;
                for (src, own) in [(*z, true), (*z_agg, false)] {
                    if nodes[src].requires_grad {
                        let acc = grad_slot(grads, src, g.rows, f);
                        for i in 0..g.rows {
                            let w = if own { 1.0 - gam[i] } else { gam[i] };
                            for c in 0..f {
                                acc[i * f + c] += w * gd[i * f + c];
                            }
                        }
                    }
                }
                if nodes[*gamma].requires_grad {
                    let zd = &nodes[*z].data.data;
                    let ad = &nodes[*z_agg].data.data;
                    let acc = grad_slot(grads, *gamma, g.rows, 1);
                    for i in 0..g.rows {
                        let span = i * f..(i + 1) * f;
                        acc[i] += gd[span.clone()]
                            .iter()
                            .zip(&ad[span.clone()])
                            .zip(&zd[span])
                            .map(|((gv, a), zv)| gv * (a - zv))
                            .sum::<f64>();
                    }
                }
            }
            Op::Sum(a) => {
                if nodes[*a].requires_grad {
                    let s = gd[0];
                    let (r, c) = nodes[*a].data.shape();
                    for o in grad_slot(grads, *a, r, c).iter_mut() {
                        *o += s;
                    }
                }
            }
            Op::MaskedNll { probs, targets } => {
                if nodes[*probs].requires_grad {
                    let pd = &nodes[*probs].data;
                    let scale = gd[0] / targets.len() as f64;
                    let cols = pd.cols;
                    let acc = grad_slot(grads, *probs, pd.rows, cols);
                    for &(i, c) in targets {
                        let v = pd.get(i, c);
                        if v > LOG_EPS {
                            acc[i * cols + c] -= scale / v;
                        }
                    }
                }
            }
            Op::Entropy { p, scale } => {
                if nodes[*p].requires_grad {
                    let pd = &nodes[*p].data;
                    let s = gd[0] * scale;
                    let acc = grad_slot(grads, *p, pd.rows, pd.cols);
                    for (o, &v) in acc.iter_mut().zip(&pd.data) {
                        let d = if v > LOG_EPS { v.ln() + 1.0 } else { LOG_EPS.ln() };
                        *o -= s * d;
                    }
                }
            }
        }
    }
}

fn grad_slot(grads: &mut [Option<Tensor>], id: usize, rows: usize, cols: usize) -> &mut [f64] {
    grads[id].get_or_insert_with(|| Tensor::zeros(rows, cols)).data.as_mut_slice()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn add_into(acc: &mut [f64], g: &[f64]) {
    for (o, v) in acc.iter_mut().zip(g) {
        *o += v;
    }
}

fn softmax_in_place(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

/// Accumulates `y * (g - <g, y>)` into `acc`.
fn softmax_vjp(acc: &mut [f64], g: &[f64], y: &[f64]) {
    let inner = dot(g, y);
    for ((o, gv), yv) in acc.iter_mut().zip(g).zip(y) {
        *o += yv * (gv - inner);
    }
}
