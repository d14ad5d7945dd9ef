use std::fmt;
use std::sync::Arc;

use rand::Rng;

use super::DenseMatrix;
use crate::error::{Error, Result};
use crate::hypergraph::SparseMatrix;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A scalar function of one matrix with a hand-written gradient, recorded as
/// a single tape node.
pub trait ScalarFunction: Send + Sync {
    fn value(&self, x: &DenseMatrix) -> Result<f64>;
    fn gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix>;
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    Hadamard(Var, Var),
    Transpose(Var),
    ConcatRows(Var, Var),
    SliceRows(Var, usize),
    ReshapePairs(Var),
    Column(Var, usize),
    RowSoftmax(Var),
    LayerNorm {
        input: Var,
        gain: Var,
        bias: Var,
        normalized: DenseMatrix,
        inv_std: Vec<f64>,
    },
    Relu(Var),
    Sigmoid(Var),
    FrobeniusSq(Var),
    Sum(Var),
    Dropout(Var, DenseMatrix),
    Sparse(Arc<SparseMatrix>, Var),
    Custom(Arc<dyn ScalarFunction>, Var),
}

impl fmt::Debug for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Scale(..) => "scale",
            Op::Hadamard(..) => "hadamard",
            Op::Transpose(..) => "transpose",
            Op::ConcatRows(..) => "concat_rows",
            Op::SliceRows(..) => "slice_rows",
            Op::ReshapePairs(..) => "reshape_pairs",
            Op::Column(..) => "column",
            Op::RowSoftmax(..) => "row_softmax",
            Op::LayerNorm { .. } => "layer_norm",
            Op::Relu(..) => "relu",
            Op::Sigmoid(..) => "sigmoid",
            Op::FrobeniusSq(..) => "frobenius_sq",
            Op::Sum(..) => "sum",
            Op::Dropout(..) => "dropout",
            Op::Sparse(..) => "sparse",
            Op::Custom(..) => "custom",
        };
        f.write_str(tag)
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: DenseMatrix,
}

/// Reverse-mode tape over dense matrices.
///
/// Nodes are appended in evaluation order, so every parent precedes its
/// children and [`Tape::backward`] is a single reverse sweep.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    adjoints: Vec<Option<DenseMatrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Adjoint of `var`; zeros when the loss does not depend on it.
    pub fn get(&self, var: Var) -> DenseMatrix {
        match &self.adjoints[var.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[var.0];
                DenseMatrix::zeros(r, c)
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: DenseMatrix) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&mut self, value: DenseMatrix) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(Op::Sub(a, b), value))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).scaled(c);
        self.push(Op::Scale(a, c), value)
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(Op::Hadamard(a, b), value))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(Op::Transpose(a), value)
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).concat_rows(self.value(b))?;
        Ok(self.push(Op::ConcatRows(a, b), value))
    }

    /// Splits into rows `0..k` and `k..rows`.
    pub fn split_rows(&mut self, a: Var, k: usize) -> Result<(Var, Var)> {
        let rows = self.value(a).rows();
        if k > rows {
            return Err(Error::shape(
                "split_rows",
                format!("split at {k} of {rows} rows"),
            ));
        }
        let top = self.value(a).slice_rows(0, k);
        let bottom = self.value(a).slice_rows(k, rows);
        let top = self.push(Op::SliceRows(a, 0), top);
        let bottom = self.push(Op::SliceRows(a, k), bottom);
        Ok((top, bottom))
    }

    /// `2n×1 → n×2`; output row `i` is `[v_i, v_{n+i}]`.
    pub fn reshape_pairs(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        if v.cols() != 1 || !v.rows().is_multiple_of(2) {
            return Err(Error::shape(
                "reshape_pairs",
                format!("expected 2n×1, got {:?}", v.shape()),
            ));
        }
        let n = v.rows() / 2;
        let value = DenseMatrix::from_fn(n, 2, |i, j| v[(i + j * n, 0)]);
        Ok(self.push(Op::ReshapePairs(a), value))
    }

    /// Column `j` as a `rows×1` matrix.
    pub fn column(&mut self, a: Var, j: usize) -> Result<Var> {
        let v = self.value(a);
        if j >= v.cols() {
            return Err(Error::shape(
                "column",
                format!("column {j} of {:?}", v.shape()),
            ));
        }
        let value = DenseMatrix::column_vector(&v.column(j));
        Ok(self.push(Op::Column(a, j), value))
    }

    /// Softmax along each row, stabilized by subtracting the row maximum.
    pub fn row_softmax(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for r in 0..value.rows() {
            let row = value.row_mut(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                total += *x;
            }
            for x in row.iter_mut() {
                *x /= total;
            }
        }
        self.push(Op::RowSoftmax(a), value)
    }

    /// Per-row normalization over columns with learnable `gain` and `bias`
    /// (both `1×cols`). Uses the population variance.
    pub fn layer_norm(&mut self, a: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let x = self.value(a);
        let (rows, cols) = x.shape();
        for (name, v) in [("gain", gain), ("bias", bias)] {
            if self.value(v).shape() != (1, cols) {
                return Err(Error::shape(
                    "layer_norm",
                    format!(
                        "{name} is {:?}, expected (1, {cols})",
                        self.value(v).shape()
                    ),
                ));
            }
        }
        let g = self.value(gain).row(0).to_vec();
        let b = self.value(bias).row(0).to_vec();
        let mut normalized = DenseMatrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let s = 1.0 / (var + eps).sqrt();
            inv_std.push(s);
            for (o, v) in normalized.row_mut(r).iter_mut().zip(row) {
                *o = (v - mean) * s;
            }
        }
        let value = DenseMatrix::from_fn(rows, cols, |r, c| normalized[(r, c)] * g[c] + b[c]);
        Ok(self.push(
            Op::LayerNorm {
                input: a,
                gain,
                bias,
                normalized,
                inv_std,
            },
            value,
        ))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| if v > 0.0 { v } else { 0.0 });
        self.push(Op::Relu(a), value)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), value)
    }

    /// `Σ a_ij²` as a 1×1 node.
    pub fn frobenius_sq(&mut self, a: Var) -> Var {
        let value = DenseMatrix::scalar(self.value(a).frobenius_sq());
        self.push(Op::FrobeniusSq(a), value)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = DenseMatrix::scalar(self.value(a).sum());
        self.push(Op::Sum(a), value)
    }

    /// Inverted dropout. With `rng = None` (inference) this is the identity;
    /// otherwise each entry is zeroed with probability `p` and survivors are
    /// scaled by `1 / (1 - p)`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, p: f64, rng: Option<&mut R>) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "dropout probability {p} not in [0, 1)"
            )));
        }
        let Some(rng) = rng.filter(|_| p > 0.0) else {
            return Ok(a);
        };
        let (rows, cols) = self.value(a).shape();
        let keep = 1.0 / (1.0 - p);
        let mask =
            DenseMatrix::from_fn(
                rows,
                cols,
                |_, _| if rng.random::<f64>() < p { 0.0 } else { keep },
            );
        let value = self.value(a).hadamard(&mask)?;
        Ok(self.push(Op::Dropout(a, mask), value))
    }

    /// `S · a` for a constant sparse `S`.
    pub fn sparse_matmul(&mut self, s: Arc<SparseMatrix>, a: Var) -> Result<Var> {
        let value = s.mul_dense(self.value(a))?;
        Ok(self.push(Op::Sparse(s, a), value))
    }

    pub fn custom(&mut self, f: Arc<dyn ScalarFunction>, a: Var) -> Result<Var> {
        let value = DenseMatrix::scalar(f.value(self.value(a))?);
        Ok(self.push(Op::Custom(f, a), value))
    }

    /// Reverse sweep from a 1×1 `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let (rows, cols) = self.value(loss).shape();
        if (rows, cols) != (1, 1) {
            return Err(Error::NonScalarLoss { rows, cols });
        }
        let mut adj: Vec<Option<DenseMatrix>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(DenseMatrix::scalar(1.0));

        fn acc(adj: &mut [Option<DenseMatrix>], v: Var, g: DenseMatrix) {
            match &mut adj[v.0] {
                Some(existing) => existing.accumulate(&g),
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul_transposed(self.value(*b))?;
                    let db = self.value(*a).transposed_matmul(&g)?;
                    acc(&mut adj, *a, da);
                    acc(&mut adj, *b, db);
                }
                Op::Add(a, b) => {
                    acc(&mut adj, *a, g.clone());
                    acc(&mut adj, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, *a, g.clone());
                    acc(&mut adj, *b, g.scaled(-1.0));
                }
                Op::Scale(a, c) => acc(&mut adj, *a, g.scaled(*c)),
                Op::Hadamard(a, b) => {
                    acc(&mut adj, *a, g.hadamard(self.value(*b))?);
                    acc(&mut adj, *b, g.hadamard(self.value(*a))?);
                }
                Op::Transpose(a) => acc(&mut adj, *a, g.transpose()),
                Op::ConcatRows(a, b) => {
                    let k = self.value(*a).rows();
                    acc(&mut adj, *a, g.slice_rows(0, k));
                    acc(&mut adj, *b, g.slice_rows(k, g.rows()));
                }
                Op::SliceRows(a, start) => {
                    let src = self.value(*a);
                    let mut full = DenseMatrix::zeros(src.rows(), src.cols());
                    let width = src.cols();
                    full.data_mut()[start * width..(start + g.rows()) * width]
                        .copy_from_slice(g.data());
                    acc(&mut adj, *a, full);
                }
                Op::ReshapePairs(a) => {
                    let n = g.rows();
                    let back = DenseMatrix::from_fn(2 * n, 1, |r, _| g[(r % n, r / n)]);
                    acc(&mut adj, *a, back);
                }
                Op::Column(a, j) => {
                    let src = self.value(*a);
                    let mut full = DenseMatrix::zeros(src.rows(), src.cols());
                    for r in 0..src.rows() {
                        full[(r, *j)] = g[(r, 0)];
                    }
                    acc(&mut adj, *a, full);
                }
                Op::RowSoftmax(a) => {
                    let y = &node.value;
                    let mut dx = DenseMatrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let dot: f64 = y.row(r).iter().zip(g.row(r)).map(|(a, b)| a * b).sum();
                        for ((o, &yv), &gv) in dx.row_mut(r).iter_mut().zip(y.row(r)).zip(g.row(r))
                        {
                            *o = yv * (gv - dot);
                        }
                    }
                    acc(&mut adj, *a, dx);
                }
                Op::LayerNorm {
                    input,
                    gain,
                    bias,
                    normalized,
                    inv_std,
                } => {
                    let (rows, cols) = normalized.shape();
                    let gvec = self.value(*gain).row(0);
                    let mut dgain = DenseMatrix::zeros(1, cols);
                    let mut dbias = DenseMatrix::zeros(1, cols);
                    let mut dx = DenseMatrix::zeros(rows, cols);
                    for r in 0..rows {
                        let xh = normalized.row(r);
                        let gr = g.row(r);
                        let mut mean_d = 0.0;
                        let mut mean_dx = 0.0;
                        for c in 0..cols {
                            dgain.data_mut()[c] += gr[c] * xh[c];
                            dbias.data_mut()[c] += gr[c];
                            let d = gr[c] * gvec[c];
                            mean_d += d;
                            mean_dx += d * xh[c];
                        }
                        mean_d /= cols as f64;
                        mean_dx /= cols as f64;
                        for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
                            let d = gr[c] * gvec[c];
                            *o = inv_std[r] * (d - mean_d - xh[c] * mean_dx);
                        }
                    }
                    acc(&mut adj, *input, dx);
                    acc(&mut adj, *gain, dgain);
                    acc(&mut adj, *bias, dbias);
                }
                Op::Relu(a) => {
                    let mask = self.value(*a).map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                    acc(&mut adj, *a, g.hadamard(&mask)?);
                }
                Op::Sigmoid(a) => {
                    let d = node.value.map(|s| s * (1.0 - s));
                    acc(&mut adj, *a, g.hadamard(&d)?);
                }
                Op::FrobeniusSq(a) => acc(&mut adj, *a, self.value(*a).scaled(2.0 * g.item())),
                Op::Sum(a) => {
                    let (r, c) = self.value(*a).shape();
                    acc(&mut adj, *a, DenseMatrix::filled(r, c, g.item()));
                }
                Op::Dropout(a, mask) => acc(&mut adj, *a, g.hadamard(mask)?),
                Op::Sparse(s, a) => {
                    // Sᵀ g by scattering rows of S.
                    let mut out = DenseMatrix::zeros(s.cols(), g.cols());
                    for r in 0..s.rows() {
                        for (c, v) in s.row(r) {
                            for (o, &gv) in out.row_mut(c).iter_mut().zip(g.row(r)) {
                                *o += v * gv;
                            }
                        }
                    }
                    acc(&mut adj, *a, out);
                }
                Op::Custom(f, a) => acc(&mut adj, *a, f.gradient(self.value(*a))?.scaled(g.item())),
            }
            adj[idx] = Some(g);
        }

        Ok(Gradients {
            adjoints: adj,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }
}
