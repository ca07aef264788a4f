//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation of a forward pass; [`Tape::backward`]
//! replays the recording in reverse and accumulates gradients into every
//! node. Each forward pass uses a fresh tape; calling `backward` twice on the
//! same tape is an error.
//!
//! The operation set is exactly what the caption and image encoders need:
//! matrix products, broadcasting bias adds, elementwise gates, slicing and
//! stacking for the recurrent layers, softmax pooling, row normalization,
//! 1-d convolution and the bidirectional ranking hinge loss.

use std::cell::RefCell;

use crate::autodiff::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op<S> {
    Leaf,
    Matmul { a: usize, b: usize },
    Transpose { a: usize },
    Add { a: usize, b: usize },
    AddRowBroadcast { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Sigmoid { a: usize },
    Tanh { a: usize },
    SliceRows { a: usize, start: usize },
    SliceCols { a: usize, start: usize },
    ConcatCols { a: usize, b: usize },
    StackRows { parts: Vec<usize> },
    Softmax { a: usize },
    Sum { a: usize },
    L2NormalizeRows { a: usize },
    HingeLoss { s: usize, margin: S },
    Conv1d { x: usize, kernel: usize, stride: usize, padding: usize },
}

struct Node<S> {
    value: Tensor<S>,
    grad: Vec<S>,
    op: Op<S>,
}

struct Inner<S> {
    nodes: Vec<Node<S>>,
    backward_done: bool,
}

/// Records a forward computation and differentiates it in reverse.
pub struct Tape<S: Scalar> {
    inner: RefCell<Inner<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape {
            inner: RefCell::new(Inner {
                nodes: Vec::new(),
                backward_done: false,
            }),
        }
    }

    fn push(&self, value: Tensor<S>, op: Op<S>) -> Var {
        let mut inner = self.inner.borrow_mut();
        let grad = vec![S::zero(); value.len()];
        inner.nodes.push(Node { value, grad, op });
        Var(inner.nodes.len() - 1)
    }

    /// Inserts an input or parameter tensor as a graph leaf.
    pub fn leaf(&self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> Tensor<S> {
        self.inner.borrow().nodes[v.0].value.clone()
    }

    pub fn value_scalar(&self, v: Var) -> S {
        self.inner.borrow().nodes[v.0].value.scalar_value()
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.inner.borrow().nodes[v.0].value.shape().to_vec()
    }

    /// Gradient of the last `backward` target with respect to `v`.
    /// Zero for nodes the loss does not depend on.
    pub fn grad(&self, v: Var) -> Tensor<S> {
        let inner = self.inner.borrow();
        let node = &inner.nodes[v.0];
        Tensor::new(node.value.shape().to_vec(), node.grad.clone()).expect("grad shape")
    }

    fn with_value<R>(&self, v: Var, f: impl FnOnce(&Tensor<S>) -> R) -> R {
        f(&self.inner.borrow().nodes[v.0].value)
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let inner = self.inner.borrow();
            crate::autodiff::tensor::matmul(&inner.nodes[a.0].value, &inner.nodes[b.0].value)?
        };
        Ok(self.push(value, Op::Matmul { a: a.0, b: b.0 }))
    }

    pub fn transpose(&self, a: Var) -> Result<Var> {
        let value = {
            let inner = self.inner.borrow();
            crate::autodiff::tensor::transpose(&inner.nodes[a.0].value)?
        };
        Ok(self.push(value, Op::Transpose { a: a.0 }))
    }

    /// Elementwise sum of two tensors with identical shape.
    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let inner = self.inner.borrow();
            let (ta, tb) = (&inner.nodes[a.0].value, &inner.nodes[b.0].value);
            if ta.shape() != tb.shape() {
                return Err(Error::Shape(format!(
                    "add: shapes {:?} and {:?} differ",
                    ta.shape(),
                    tb.shape()
                )));
            }
            let data = ta
                .data()
                .iter()
                .zip(tb.data())
                .map(|(&x, &y)| x + y)
                .collect();
            Tensor::new(ta.shape().to_vec(), data)?
        };
        Ok(self.push(value, Op::Add { a: a.0, b: b.0 }))
    }

    /// Adds a length-`m` vector to every row of an `n×m` matrix.
    pub fn add_row_broadcast(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let inner = self.inner.borrow();
            let (ta, tb) = (&inner.nodes[a.0].value, &inner.nodes[b.0].value);
            if ta.ndim() != 2 || tb.len() != ta.cols() {
                return Err(Error::Shape(format!(
                    "add_row_broadcast: matrix {:?} vs vector {:?}",
                    ta.shape(),
                    tb.shape()
                )));
            }
            let m = ta.cols();
            let data = ta
                .data()
                .iter()
                .enumerate()
                .map(|(i, &x)| x + tb.data()[i % m])
                .collect();
            Tensor::new(ta.shape().to_vec(), data)?
        };
        Ok(self.push(value, Op::AddRowBroadcast { a: a.0, b: b.0 }))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let inner = self.inner.borrow();
            let (ta, tb) = (&inner.nodes[a.0].value, &inner.nodes[b.0].value);
            if ta.shape() != tb.shape() {
                return Err(Error::Shape(format!(
                    "mul: shapes {:?} and {:?} differ",
                    ta.shape(),
                    tb.shape()
                )));
            }
            let data = ta
                .data()
                .iter()
                .zip(tb.data())
                .map(|(&x, &y)| x * y)
                .collect();
            Tensor::new(ta.shape().to_vec(), data)?
        };
        Ok(self.push(value, Op::Mul { a: a.0, b: b.0 }))
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        let value = self.with_value(a, |t| {
            t.map(|x| S::one() / (S::one() + (-x).exp()))
        });
        self.push(value, Op::Sigmoid { a: a.0 })
    }

    pub fn tanh(&self, a: Var) -> Var {
        let value = self.with_value(a, |t| t.map(|x| x.tanh()));
        self.push(value, Op::Tanh { a: a.0 })
    }

    /// Rows `start..end` of a matrix.
    pub fn slice_rows(&self, a: Var, start: usize, end: usize) -> Result<Var> {
        let value = {
            let inner = self.inner.borrow();
            let ta = &inner.nodes[a.0].value;
            if ta.ndim() != 2 || start >= end || end > ta.rows() {
                return Err(Error::Shape(format!(
                    "slice_rows {}..{} out of range for shape {:?}",
                    start,
                    end,
                    ta.shape()
                )));
            }
            let c = ta.cols();
            let data = ta.data()[start * c..end * c].to_vec();
            Tensor::new(vec![end - start, c], data)?
        };
        Ok(self.push(value, Op::SliceRows { a: a.0, start }))
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&self, a: Var, start: usize, end: usize) -> Result<Var> {
        let value = {
            let inner = self.inner.borrow();
            let ta = &inner.nodes[a.0].value;
            if ta.ndim() != 2 || start >= end || end > ta.cols() {
                return Err(Error::Shape(format!(
                    "slice_cols {}..{} out of range for shape {:?}",
                    start,
                    end,
                    ta.shape()
                )));
            }
            let mut data = Vec::with_capacity(ta.rows() * (end - start));
            for i in 0..ta.rows() {
                data.extend_from_slice(&ta.row(i)[start..end]);
            }
            Tensor::new(vec![ta.rows(), end - start], data)?
        };
        Ok(self.push(value, Op::SliceCols { a: a.0, start }))
    }

    /// Horizontal concatenation of two matrices with equal row counts.
    pub fn concat_cols(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let inner = self.inner.borrow();
            let (ta, tb) = (&inner.nodes[a.0].value, &inner.nodes[b.0].value);
            if ta.ndim() != 2 || tb.ndim() != 2 || ta.rows() != tb.rows() {
                return Err(Error::Shape(format!(
                    "concat_cols: shapes {:?} and {:?}",
                    ta.shape(),
                    tb.shape()
                )));
            }
            let mut data = Vec::with_capacity(ta.len() + tb.len());
            for i in 0..ta.rows() {
                data.extend_from_slice(ta.row(i));
                data.extend_from_slice(tb.row(i));
            }
            Tensor::new(vec![ta.rows(), ta.cols() + tb.cols()], data)?
        };
        Ok(self.push(value, Op::ConcatCols { a: a.0, b: b.0 }))
    }

    /// Stacks single-row matrices (or vectors) into an `n×m` matrix.
    pub fn stack_rows(&self, parts: &[Var]) -> Result<Var> {
        let value = {
            let inner = self.inner.borrow();
            if parts.is_empty() {
                return Err(Error::Shape("stack_rows: no inputs".into()));
            }
            let width = inner.nodes[parts[0].0].value.len();
            let mut data = Vec::with_capacity(parts.len() * width);
            for p in parts {
                let t = &inner.nodes[p.0].value;
                if t.len() != width || (t.ndim() == 2 && t.rows() != 1) {
                    return Err(Error::Shape(format!(
                        "stack_rows: part with shape {:?}, expected a single row of width {}",
                        t.shape(),
                        width
                    )));
                }
                data.extend_from_slice(t.data());
            }
            Tensor::new(vec![parts.len(), width], data)?
        };
        Ok(self.push(
            value,
            Op::StackRows {
                parts: parts.iter().map(|p| p.0).collect(),
            },
        ))
    }

    /// Softmax over the entries of a column vector (`n×1` or 1-d).
    /// The output is non-negative and sums to one.
    pub fn softmax(&self, a: Var) -> Result<Var> {
        let value = {
            let inner = self.inner.borrow();
            let ta = &inner.nodes[a.0].value;
            if ta.ndim() == 2 && ta.cols() != 1 {
                return Err(Error::Shape(format!(
                    "softmax expects a column vector, got {:?}",
                    ta.shape()
                )));
            }
            let max = ta
                .data()
                .iter()
                .cloned()
                .fold(S::neg_infinity(), |acc, v| if v > acc { v } else { acc });
            let exps: Vec<S> = ta.data().iter().map(|&v| (v - max).exp()).collect();
            let total: S = exps.iter().cloned().sum();
            let data = exps.into_iter().map(|e| e / total).collect();
            Tensor::new(ta.shape().to_vec(), data)?
        };
        Ok(self.push(value, Op::Softmax { a: a.0 }))
    }

    /// Sum of all entries, as a scalar node.
    pub fn sum(&self, a: Var) -> Var {
        let total = self.with_value(a, |t| t.data().iter().cloned().sum());
        self.push(Tensor::scalar(total), Op::Sum { a: a.0 })
    }

    /// Scales every row of a matrix to unit L2 norm.
    pub fn l2_normalize_rows(&self, a: Var) -> Result<Var> {
        let value = {
            let inner = self.inner.borrow();
            let ta = &inner.nodes[a.0].value;
            if ta.ndim() != 2 {
                return Err(Error::Shape(format!(
                    "l2_normalize_rows expects a matrix, got {:?}",
                    ta.shape()
                )));
            }
            let mut data = Vec::with_capacity(ta.len());
            for i in 0..ta.rows() {
                let norm = row_norm(ta.row(i));
                if norm <= S::zero() {
                    return Err(Error::Graph(format!("l2_normalize_rows: row {i} has zero norm")));
                }
                data.extend(ta.row(i).iter().map(|&v| v / norm));
            }
            Tensor::new(ta.shape().to_vec(), data)?
        };
        Ok(self.push(value, Op::L2NormalizeRows { a: a.0 }))
    }

    /// Bidirectional max-margin ranking loss over a square similarity matrix
    /// whose diagonal holds the matched-pair similarities:
    ///
    /// `L = Σ_{j≠k} max(0, α − S_jj + S_jk) + max(0, α − S_jj + S_kj)`
    pub fn hinge_loss(&self, s: Var, margin: S) -> Result<Var> {
        let value = {
            let inner = self.inner.borrow();
            hinge_loss_value(&inner.nodes[s.0].value, margin)?
        };
        Ok(self.push(Tensor::scalar(value), Op::HingeLoss { s: s.0, margin }))
    }

    /// Cross-correlation of `x` (`T×C_in`) with `kernel` (`K×C_in×C_out`),
    /// zero-padded by `padding` frames on each side.
    /// Output has `floor((T + 2·padding − K)/stride) + 1` frames.
    pub fn conv1d(&self, x: Var, kernel: Var, stride: usize, padding: usize) -> Result<Var> {
        let value = {
            let inner = self.inner.borrow();
            conv1d_value(
                &inner.nodes[x.0].value,
                &inner.nodes[kernel.0].value,
                stride,
                padding,
            )?
        };
        Ok(self.push(
            value,
            Op::Conv1d {
                x: x.0,
                kernel: kernel.0,
                stride,
                padding,
            },
        ))
    }

    /// Propagates gradients from a scalar loss node back to every leaf.
    /// A tape can only be differentiated once; build a new tape for the
    /// next forward pass.
    pub fn backward(&self, loss: Var) -> Result<()> {
        let mut inner = self.inner.borrow_mut();
        if inner.backward_done {
            return Err(Error::Graph(
                "backward called twice on the same tape; run a new forward pass first".into(),
            ));
        }
        if !inner.nodes[loss.0].value.is_scalar() {
            return Err(Error::Graph(format!(
                "backward target must be scalar, got shape {:?}",
                inner.nodes[loss.0].value.shape()
            )));
        }
        inner.backward_done = true;
        inner.nodes[loss.0].grad[0] = S::one();

        for idx in (0..inner.nodes.len()).rev() {
            backprop_node(&mut inner.nodes, idx);
        }
        Ok(())
    }
}

fn row_norm<S: Scalar>(row: &[S]) -> S {
    row.iter().map(|&v| v * v).sum::<S>().sqrt()
}

/// Numeric hinge-loss value; shared by the tape op and the standalone helper.
pub(crate) fn hinge_loss_value<S: Scalar>(s: &Tensor<S>, margin: S) -> Result<S> {
    if s.ndim() != 2 || s.rows() != s.cols() {
        return Err(Error::Shape(format!(
            "hinge loss expects a square similarity matrix, got {:?}",
            s.shape()
        )));
    }
    let b = s.rows();
    let mut total = S::zero();
    for j in 0..b {
        let sjj = s.at2(j, j);
        for k in 0..b {
            if k == j {
                continue;
            }
            let caption_term = margin - sjj + s.at2(j, k);
            if caption_term > S::zero() {
                total = total + caption_term;
            }
            let image_term = margin - sjj + s.at2(k, j);
            if image_term > S::zero() {
                total = total + image_term;
            }
        }
    }
    Ok(total)
}

fn conv1d_value<S: Scalar>(
    x: &Tensor<S>,
    kernel: &Tensor<S>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<S>> {
    if x.ndim() != 2 || kernel.ndim() != 3 {
        return Err(Error::Shape(format!(
            "conv1d: input {:?} must be T×C_in and kernel {:?} must be K×C_in×C_out",
            x.shape(),
            kernel.shape()
        )));
    }
    let (t, c_in) = (x.rows(), x.cols());
    let (k, kc_in, c_out) = (kernel.shape()[0], kernel.shape()[1], kernel.shape()[2]);
    if kc_in != c_in {
        return Err(Error::Shape(format!(
            "conv1d: input has {c_in} channels but kernel expects {kc_in}"
        )));
    }
    if stride == 0 {
        return Err(Error::Shape("conv1d: stride must be positive".into()));
    }
    if k > t + 2 * padding {
        return Err(Error::Shape(format!(
            "conv1d: kernel width {k} exceeds padded input length {}",
            t + 2 * padding
        )));
    }
    let t_out = (t + 2 * padding - k) / stride + 1;
    let mut out = Tensor::zeros(vec![t_out, c_out]);
    for to in 0..t_out {
        for kk in 0..k {
            let xi = (to * stride + kk) as isize - padding as isize;
            if xi < 0 || xi >= t as isize {
                continue;
            }
            let xi = xi as usize;
            for c in 0..c_in {
                let xv = x.at2(xi, c);
                if xv == S::zero() {
                    continue;
                }
                for o in 0..c_out {
                    *out.at2_mut(to, o) = out.at2(to, o) + xv * kernel.at3(kk, c, o);
                }
            }
        }
    }
    Ok(out)
}

// Indexed loops throughout: each arm writes into one or two gradient
// slices while reading the output value at the same position.
#[allow(clippy::needless_range_loop)]
fn backprop_node<S: Scalar>(nodes: &mut [Node<S>], idx: usize) {
    // Split off the node being processed so its inputs can be mutated.
    let (before, rest) = nodes.split_at_mut(idx);
    let node = &rest[0];
    if node.grad.iter().all(|&g| g == S::zero()) {
        return;
    }
    match &node.op {
        Op::Leaf => {}
        Op::Matmul { a, b } => {
            let g = Tensor::new(node.value.shape().to_vec(), node.grad.clone()).unwrap();
            let ta = before[*a].value.clone();
            let tb = before[*b].value.clone();
            let da = crate::autodiff::tensor::matmul(
                &g,
                &crate::autodiff::tensor::transpose(&tb).unwrap(),
            )
            .unwrap();
            let db = crate::autodiff::tensor::matmul(
                &crate::autodiff::tensor::transpose(&ta).unwrap(),
                &g,
            )
            .unwrap();
            accumulate(&mut before[*a].grad, da.data());
            accumulate(&mut before[*b].grad, db.data());
        }
        Op::Transpose { a } => {
            let g = Tensor::new(node.value.shape().to_vec(), node.grad.clone()).unwrap();
            let gt = crate::autodiff::tensor::transpose(&g).unwrap();
            accumulate(&mut before[*a].grad, gt.data());
        }
        Op::Add { a, b } => {
            let grad = node.grad.clone();
            accumulate(&mut before[*a].grad, &grad);
            accumulate(&mut before[*b].grad, &grad);
        }
        Op::AddRowBroadcast { a, b } => {
            let grad = node.grad.clone();
            let m = before[*b].value.len();
            accumulate(&mut before[*a].grad, &grad);
            for (i, &g) in grad.iter().enumerate() {
                before[*b].grad[i % m] = before[*b].grad[i % m] + g;
            }
        }
        Op::Mul { a, b } => {
            let grad = node.grad.clone();
            let va = before[*a].value.data().to_vec();
            let vb = before[*b].value.data().to_vec();
            for i in 0..grad.len() {
                before[*a].grad[i] = before[*a].grad[i] + grad[i] * vb[i];
                before[*b].grad[i] = before[*b].grad[i] + grad[i] * va[i];
            }
        }
        Op::Sigmoid { a } => {
            let y = node.value.data();
            for i in 0..y.len() {
                let d = node.grad[i] * y[i] * (S::one() - y[i]);
                before[*a].grad[i] = before[*a].grad[i] + d;
            }
        }
        Op::Tanh { a } => {
            let y = node.value.data();
            for i in 0..y.len() {
                let d = node.grad[i] * (S::one() - y[i] * y[i]);
                before[*a].grad[i] = before[*a].grad[i] + d;
            }
        }
        Op::SliceRows { a, start } => {
            let c = before[*a].value.cols();
            let offset = start * c;
            for (i, &g) in node.grad.iter().enumerate() {
                before[*a].grad[offset + i] = before[*a].grad[offset + i] + g;
            }
        }
        Op::SliceCols { a, start } => {
            let c = before[*a].value.cols();
            let w = node.value.cols();
            for i in 0..node.value.rows() {
                for j in 0..w {
                    let src = i * w + j;
                    let dst = i * c + start + j;
                    before[*a].grad[dst] = before[*a].grad[dst] + node.grad[src];
                }
            }
        }
        Op::ConcatCols { a, b } => {
            let ca = before[*a].value.cols();
            let cb = before[*b].value.cols();
            for i in 0..node.value.rows() {
                for j in 0..ca {
                    before[*a].grad[i * ca + j] =
                        before[*a].grad[i * ca + j] + node.grad[i * (ca + cb) + j];
                }
                for j in 0..cb {
                    before[*b].grad[i * cb + j] =
                        before[*b].grad[i * cb + j] + node.grad[i * (ca + cb) + ca + j];
                }
            }
        }
        Op::StackRows { parts } => {
            let parts = parts.clone();
            let width = node.value.cols();
            let grad = node.grad.clone();
            for (i, p) in parts.iter().enumerate() {
                accumulate(&mut before[*p].grad, &grad[i * width..(i + 1) * width]);
            }
        }
        Op::Softmax { a } => {
            let y = node.value.data();
            let dot: S = node
                .grad
                .iter()
                .zip(y.iter())
                .map(|(&g, &yi)| g * yi)
                .sum();
            for i in 0..y.len() {
                let d = y[i] * (node.grad[i] - dot);
                before[*a].grad[i] = before[*a].grad[i] + d;
            }
        }
        Op::Sum { a } => {
            let g = node.grad[0];
            for slot in before[*a].grad.iter_mut() {
                *slot = *slot + g;
            }
        }
        Op::L2NormalizeRows { a } => {
            let rows = node.value.rows();
            let cols = node.value.cols();
            for i in 0..rows {
                let norm = row_norm(before[*a].value.row(i));
                let y = node.value.row(i).to_vec();
                let g = &node.grad[i * cols..(i + 1) * cols];
                let dot: S = g.iter().zip(y.iter()).map(|(&gi, &yi)| gi * yi).sum();
                for j in 0..cols {
                    let d = (g[j] - y[j] * dot) / norm;
                    before[*a].grad[i * cols + j] = before[*a].grad[i * cols + j] + d;
                }
            }
        }
        Op::HingeLoss { s, margin } => {
            let g = node.grad[0];
            let margin = *margin;
            let sv = before[*s].value.clone();
            let b = sv.rows();
            for j in 0..b {
                let sjj = sv.at2(j, j);
                for k in 0..b {
                    if k == j {
                        continue;
                    }
                    if margin - sjj + sv.at2(j, k) > S::zero() {
                        before[*s].grad[j * b + j] = before[*s].grad[j * b + j] - g;
                        before[*s].grad[j * b + k] = before[*s].grad[j * b + k] + g;
                    }
                    if margin - sjj + sv.at2(k, j) > S::zero() {
                        before[*s].grad[j * b + j] = before[*s].grad[j * b + j] - g;
                        before[*s].grad[k * b + j] = before[*s].grad[k * b + j] + g;
                    }
                }
            }
        }
        Op::Conv1d {
            x,
            kernel,
            stride,
            padding,
        } => {
            let (x, kernel, stride, padding) = (*x, *kernel, *stride, *padding);
            let tx = before[x].value.clone();
            let tk = before[kernel].value.clone();
            let (t, c_in) = (tx.rows(), tx.cols());
            let (k, _, c_out) = (tk.shape()[0], tk.shape()[1], tk.shape()[2]);
            let t_out = node.value.rows();
            let grad = node.grad.clone();
            for to in 0..t_out {
                for kk in 0..k {
                    let xi = (to * stride + kk) as isize - padding as isize;
                    if xi < 0 || xi >= t as isize {
                        continue;
                    }
                    let xi = xi as usize;
                    for c in 0..c_in {
                        let xv = tx.at2(xi, c);
                        for o in 0..c_out {
                            let g = grad[to * c_out + o];
                            // d/dx
                            before[x].grad[xi * c_in + c] =
                                before[x].grad[xi * c_in + c] + g * tk.at3(kk, c, o);
                            // d/dkernel
                            let kidx = (kk * c_in + c) * c_out + o;
                            before[kernel].grad[kidx] = before[kernel].grad[kidx] + g * xv;
                        }
                    }
                }
            }
        }
    }
}

fn accumulate<S: Scalar>(dst: &mut [S], src: &[S]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}
