//! Reverse-mode automatic differentiation over a flat tape.
//!
//! Every forward pass builds a fresh [`Tape`]; parameters enter as leaves
//! and gradients come back out per leaf after [`Tape::backward`]. Ops cover
//! exactly what the models need: dense affine maps, elementwise gates,
//! row softmax, dropout, gather/stack/concat plumbing, max-over-time
//! pooling, a 1-D convolution and the cross-entropy losses.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::tensor::{matmul, Tensor};

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("{op}: shape mismatch ({detail})")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("empty sequence")]
    EmptySequence,
    #[error("dropout rate must lie in [0,1), got {0}")]
    BadDropoutRate(f64),
    #[error("backward target must be a scalar")]
    NonScalarLoss,
    #[error("non-finite gradient for parameter {0:?}")]
    NonFiniteGradient(String),
}

fn shape_err(op: &'static str, detail: String) -> NnError {
    NnError::ShapeMismatch { op, detail }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    AddN(Vec<Var>),
    Mul(Var, Var),
    OneMinus(Var),
    Scale(Var, f64),
    Matmul(Var, Var),
    VecMat(Var, Var),
    AddBias(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    SoftmaxRows(Var),
    Dropout { x: Var, mask: Vec<f64> },
    Concat(Vec<Var>),
    StackRows(Vec<Var>),
    RowOf(Var, usize),
    PadRows { x: Var, orig_rows: usize },
    MaxPoolRows { x: Var, argmax: Vec<usize> },
    GatherRows { table: Var, idx: Vec<usize> },
    Conv1d { x: Var, w: Var, b: Var, window: usize },
    CrossEntropy { probs: Var, target: Vec<f64> },
    MaskedNllSum { probs: Var, classes: Vec<usize>, mask: Vec<bool> },
    SumAll(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Flat computation tape; node indices grow monotonically so reverse
/// iteration is a valid reverse-topological order.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` target w.r.t. `v`, if tracked.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_requires(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (va, vb) = (self.value(a), self.value(b));
        if !va.same_shape(vb) {
            return Err(shape_err(
                "add",
                format!("{:?} vs {:?}", va.shape(), vb.shape()),
            ));
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor::new(va.shape().to_vec(), data).expect("add shape");
        let rg = self.any_requires(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn add_n(&mut self, vars: &[Var]) -> Result<Var, NnError> {
        let first = *vars.first().ok_or(NnError::EmptySequence)?;
        let shape = self.value(first).shape().to_vec();
        let mut data = vec![0.0; self.value(first).len()];
        for v in vars {
            let t = self.value(*v);
            if t.shape() != shape.as_slice() {
                return Err(shape_err(
                    "add_n",
                    format!("{:?} vs {:?}", shape, t.shape()),
                ));
            }
            for (acc, x) in data.iter_mut().zip(t.data()) {
                *acc += x;
            }
        }
        let value = Tensor::new(shape, data).expect("add_n shape");
        let rg = self.any_requires(vars);
        Ok(self.push(value, Op::AddN(vars.to_vec()), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (va, vb) = (self.value(a), self.value(b));
        if !va.same_shape(vb) {
            return Err(shape_err(
                "mul",
                format!("{:?} vs {:?}", va.shape(), vb.shape()),
            ));
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x * y)
            .collect();
        let value = Tensor::new(va.shape().to_vec(), data).expect("mul shape");
        let rg = self.any_requires(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    pub fn one_minus(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let data = vx.data().iter().map(|v| 1.0 - v).collect();
        let value = Tensor::new(vx.shape().to_vec(), data).expect("one_minus shape");
        let rg = self.nodes[x.0].requires_grad;
        self.push(value, Op::OneMinus(x), rg)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let vx = self.value(x);
        let data = vx.data().iter().map(|v| c * v).collect();
        let value = Tensor::new(vx.shape().to_vec(), data).expect("scale shape");
        let rg = self.nodes[x.0].requires_grad;
        self.push(value, Op::Scale(x, c), rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let value = matmul(self.value(a), self.value(b)).map_err(|_| {
            shape_err(
                "matmul",
                format!(
                    "{:?} x {:?}",
                    self.value(a).shape(),
                    self.value(b).shape()
                ),
            )
        })?;
        let rg = self.any_requires(&[a, b]);
        Ok(self.push(value, Op::Matmul(a, b), rg))
    }

    /// Vector-matrix product: `[p] . [p x q] -> [q]`.
    pub fn vecmat(&mut self, v: Var, m: Var) -> Result<Var, NnError> {
        let (vv, vm) = (self.value(v), self.value(m));
        if vv.shape().len() != 1 || vm.shape().len() != 2 || vv.len() != vm.rows() {
            return Err(shape_err(
                "vecmat",
                format!("{:?} x {:?}", vv.shape(), vm.shape()),
            ));
        }
        let q = vm.cols();
        let mut data = vec![0.0; q];
        for (k, &x) in vv.data().iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = vm.row(k);
            for j in 0..q {
                data[j] += x * row[j];
            }
        }
        let value = Tensor::vector(data);
        let rg = self.any_requires(&[v, m]);
        Ok(self.push(value, Op::VecMat(v, m), rg))
    }

    /// Broadcast-add a bias vector to every row of a matrix.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var, NnError> {
        let (vx, vb) = (self.value(x), self.value(b));
        if vx.shape().len() != 2 || vb.shape().len() != 1 || vx.cols() != vb.len() {
            return Err(shape_err(
                "add_bias",
                format!("{:?} + {:?}", vx.shape(), vb.shape()),
            ));
        }
        let (n, q) = (vx.rows(), vx.cols());
        let mut data = vx.data().to_vec();
        for i in 0..n {
            for j in 0..q {
                data[i * q + j] += vb.data()[j];
            }
        }
        let value = Tensor::new(vec![n, q], data).expect("add_bias shape");
        let rg = self.any_requires(&[x, b]);
        Ok(self.push(value, Op::AddBias(x, b), rg))
    }

    /// `X W + b` for `X: [n x p]`, `W: [p x q]`, `b: [q]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NnError> {
        let xw = self.matmul(x, w)?;
        self.add_bias(xw, b)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let data = vx.data().iter().map(|v| v.tanh()).collect();
        let value = Tensor::new(vx.shape().to_vec(), data).expect("tanh shape");
        let rg = self.nodes[x.0].requires_grad;
        self.push(value, Op::Tanh(x), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let data = vx.data().iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
        let value = Tensor::new(vx.shape().to_vec(), data).expect("sigmoid shape");
        let rg = self.nodes[x.0].requires_grad;
        self.push(value, Op::Sigmoid(x), rg)
    }

    /// Softmax over the last axis of a 1-D or 2-D tensor.
    pub fn softmax(&mut self, x: Var) -> Result<Var, NnError> {
        let vx = self.value(x);
        let (rows, cols) = match vx.shape() {
            [c] => (1, *c),
            [r, c] => (*r, *c),
            other => {
                return Err(shape_err("softmax", format!("rank {} input", other.len())))
            }
        };
        if cols == 0 {
            return Err(shape_err("softmax", "zero-width rows".to_string()));
        }
        let mut data = vec![0.0; rows * cols];
        for r in 0..rows {
            let row = &vx.data()[r * cols..(r + 1) * cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (j, &v) in row.iter().enumerate() {
                let e = (v - max).exp();
                data[r * cols + j] = e;
                sum += e;
            }
            for j in 0..cols {
                data[r * cols + j] /= sum;
            }
        }
        let value = Tensor::new(vx.shape().to_vec(), data).expect("softmax shape");
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(value, Op::SoftmaxRows(x), rg))
    }

    /// Inverted dropout. `rng: None` means evaluation mode, where this is
    /// exactly the identity (no node is added).
    pub fn dropout(
        &mut self,
        x: Var,
        rate: f64,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var, NnError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NnError::BadDropoutRate(rate));
        }
        let rng = match rng {
            None => return Ok(x),
            Some(r) => r,
        };
        if rate == 0.0 {
            return Ok(x);
        }
        let keep_scale = 1.0 / (1.0 - rate);
        let vx = self.value(x);
        let mask: Vec<f64> = (0..vx.len())
            .map(|_| {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    keep_scale
                }
            })
            .collect();
        let data = vx.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(vx.shape().to_vec(), data).expect("dropout shape");
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(value, Op::Dropout { x, mask }, rg))
    }

    /// Concatenate 1-D tensors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        if parts.is_empty() {
            return Err(NnError::EmptySequence);
        }
        let mut data = Vec::new();
        for p in parts {
            let t = self.value(*p);
            if t.shape().len() != 1 {
                return Err(shape_err("concat", format!("rank {}", t.shape().len())));
            }
            data.extend_from_slice(t.data());
        }
        let value = Tensor::vector(data);
        let rg = self.any_requires(parts);
        Ok(self.push(value, Op::Concat(parts.to_vec()), rg))
    }

    /// Stack 1-D tensors of equal length into a matrix, one per row.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var, NnError> {
        let first = *rows.first().ok_or(NnError::EmptySequence)?;
        let cols = self.value(first).len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let t = self.value(*r);
            if t.shape().len() != 1 || t.len() != cols {
                return Err(shape_err(
                    "stack_rows",
                    format!("expected [{}], got {:?}", cols, t.shape()),
                ));
            }
            data.extend_from_slice(t.data());
        }
        let value = Tensor::new(vec![rows.len(), cols], data).expect("stack shape");
        let rg = self.any_requires(rows);
        Ok(self.push(value, Op::StackRows(rows.to_vec()), rg))
    }

    /// Extract row `i` of a matrix as a vector.
    pub fn row_of(&mut self, x: Var, i: usize) -> Result<Var, NnError> {
        let vx = self.value(x);
        if vx.shape().len() != 2 || i >= vx.rows() {
            return Err(shape_err(
                "row_of",
                format!("row {} of {:?}", i, vx.shape()),
            ));
        }
        let value = Tensor::vector(vx.row(i).to_vec());
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(value, Op::RowOf(x, i), rg))
    }

    /// Zero-pad a matrix with extra rows at the bottom up to `rows`.
    pub fn pad_rows(&mut self, x: Var, rows: usize) -> Result<Var, NnError> {
        let vx = self.value(x);
        if vx.shape().len() != 2 {
            return Err(shape_err("pad_rows", format!("{:?}", vx.shape())));
        }
        let (n, c) = (vx.rows(), vx.cols());
        if rows <= n {
            return Ok(x);
        }
        let mut data = vx.data().to_vec();
        data.resize(rows * c, 0.0);
        let value = Tensor::new(vec![rows, c], data).expect("pad shape");
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(value, Op::PadRows { x, orig_rows: n }, rg))
    }

    /// Per-column maximum over rows. Returns the pooled vector and, per
    /// column, the row index that attained the maximum (earliest row wins
    /// ties).
    pub fn max_pool_rows(&mut self, x: Var) -> Result<(Var, Vec<usize>), NnError> {
        let vx = self.value(x);
        if vx.shape().len() != 2 || vx.rows() == 0 {
            return Err(NnError::EmptySequence);
        }
        let (n, c) = (vx.rows(), vx.cols());
        let mut best = vx.row(0).to_vec();
        let mut argmax = vec![0usize; c];
        for i in 1..n {
            let row = vx.row(i);
            for j in 0..c {
                if row[j] > best[j] {
                    best[j] = row[j];
                    argmax[j] = i;
                }
            }
        }
        let value = Tensor::vector(best);
        let rg = self.nodes[x.0].requires_grad;
        let out = self.push(
            value,
            Op::MaxPoolRows {
                x,
                argmax: argmax.clone(),
            },
            rg,
        );
        Ok((out, argmax))
    }

    /// Select rows of a table by index; duplicate indices are allowed and
    /// their gradients accumulate into the same table row.
    pub fn gather_rows(&mut self, table: Var, idx: &[usize]) -> Result<Var, NnError> {
        let vt = self.value(table);
        if vt.shape().len() != 2 {
            return Err(shape_err("gather_rows", format!("{:?}", vt.shape())));
        }
        let (n, c) = (vt.rows(), vt.cols());
        if let Some(bad) = idx.iter().find(|&&i| i >= n) {
            return Err(shape_err(
                "gather_rows",
                format!("index {} out of {} rows", bad, n),
            ));
        }
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(vt.row(i));
        }
        let value = Tensor::new(vec![idx.len(), c], data).expect("gather shape");
        let rg = self.nodes[table.0].requires_grad;
        Ok(self.push(
            value,
            Op::GatherRows {
                table,
                idx: idx.to_vec(),
            },
            rg,
        ))
    }

    /// Valid 1-D convolution over rows: `x: [n x d]`, `w: [window*d x maps]`,
    /// `b: [maps]` producing `[(n-window+1) x maps]`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, window: usize) -> Result<Var, NnError> {
        let (vx, vw, vb) = (self.value(x), self.value(w), self.value(b));
        if vx.shape().len() != 2 || vw.shape().len() != 2 || vb.shape().len() != 1 {
            return Err(shape_err("conv1d", "expected matrix, matrix, vector".into()));
        }
        let (n, d) = (vx.rows(), vx.cols());
        let maps = vw.cols();
        if window == 0 || n < window || vw.rows() != window * d || vb.len() != maps {
            return Err(shape_err(
                "conv1d",
                format!(
                    "x {:?}, w {:?}, b {:?}, window {}",
                    vx.shape(),
                    vw.shape(),
                    vb.shape(),
                    window
                ),
            ));
        }
        let positions = n - window + 1;
        let mut data = vec![0.0; positions * maps];
        for t in 0..positions {
            for j in 0..window {
                let xrow = vx.row(t + j);
                for (k, &xv) in xrow.iter().enumerate() {
                    if xv == 0.0 {
                        continue;
                    }
                    let wrow = vw.row(j * d + k);
                    for m in 0..maps {
                        data[t * maps + m] += xv * wrow[m];
                    }
                }
            }
            for m in 0..maps {
                data[t * maps + m] += vb.data()[m];
            }
        }
        let value = Tensor::new(vec![positions, maps], data).expect("conv shape");
        let rg = self.any_requires(&[x, w, b]);
        Ok(self.push(value, Op::Conv1d { x, w, b, window }, rg))
    }

    /// Cross-entropy `-sum(target * ln probs)` of a 1-D distribution.
    pub fn cross_entropy(&mut self, probs: Var, target: &[f64]) -> Result<Var, NnError> {
        let vp = self.value(probs);
        if vp.shape().len() != 1 || vp.len() != target.len() {
            return Err(shape_err(
                "cross_entropy",
                format!("probs {:?}, target [{}]", vp.shape(), target.len()),
            ));
        }
        let mut loss = 0.0;
        for (j, (&p, &t)) in vp.data().iter().zip(target).enumerate() {
            if t == 0.0 {
                continue;
            }
            if p <= 0.0 {
                return Err(NnError::DomainError(format!(
                    "nonpositive probability {p} at class {j}"
                )));
            }
            loss -= t * p.ln();
        }
        let value = Tensor::scalar(loss);
        let rg = self.nodes[probs.0].requires_grad;
        Ok(self.push(
            value,
            Op::CrossEntropy {
                probs,
                target: target.to_vec(),
            },
            rg,
        ))
    }

    /// Sum of `-ln probs[i, classes[i]]` over rows where `mask[i]` holds.
    pub fn masked_nll_sum(
        &mut self,
        probs: Var,
        classes: &[usize],
        mask: &[bool],
    ) -> Result<Var, NnError> {
        let vp = self.value(probs);
        if vp.shape().len() != 2 || classes.len() != vp.rows() || mask.len() != vp.rows() {
            return Err(shape_err(
                "masked_nll_sum",
                format!(
                    "probs {:?}, {} classes, {} mask",
                    vp.shape(),
                    classes.len(),
                    mask.len()
                ),
            ));
        }
        let cols = vp.cols();
        let mut loss = 0.0;
        for i in 0..vp.rows() {
            if !mask[i] {
                continue;
            }
            if classes[i] >= cols {
                return Err(shape_err(
                    "masked_nll_sum",
                    format!("class {} out of {}", classes[i], cols),
                ));
            }
            let p = vp.get2(i, classes[i]);
            if p <= 0.0 {
                return Err(NnError::DomainError(format!(
                    "nonpositive probability {p} at row {i}"
                )));
            }
            loss -= p.ln();
        }
        let value = Tensor::scalar(loss);
        let rg = self.nodes[probs.0].requires_grad;
        Ok(self.push(
            value,
            Op::MaskedNllSum {
                probs,
                classes: classes.to_vec(),
                mask: mask.to_vec(),
            },
            rg,
        ))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum_all(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let value = Tensor::scalar(vx.data().iter().sum());
        let rg = self.nodes[x.0].requires_grad;
        self.push(value, Op::SumAll(x), rg)
    }

    /// Reverse pass from a scalar loss; gradients land on every node with
    /// `requires_grad`, retrievable through [`Tape::grad`].
    pub fn backward(&mut self, loss: Var) -> Result<(), NnError> {
        if self.value(loss).len() != 1 {
            return Err(NnError::NonScalarLoss);
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        let seed = Tensor::new(self.value(loss).shape().to_vec(), vec![1.0]).expect("seed");
        grads[loss.0] = Some(seed);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(&mut grads, i, &g);
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, grads: &mut [Option<Tensor>], node: usize, g: &Tensor) {
        let accum = |grads: &mut [Option<Tensor>], nodes: &[Node], v: Var, delta: Tensor| {
            if !nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => {
                    for (a, d) in acc.data_mut().iter_mut().zip(delta.data()) {
                        *a += d;
                    }
                }
                slot @ None => *slot = Some(delta),
            }
        };
        let nodes = &self.nodes;
        match &nodes[node].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                accum(grads, nodes, *a, g.clone());
                accum(grads, nodes, *b, g.clone());
            }
            Op::AddN(vars) => {
                for v in vars {
                    accum(grads, nodes, *v, g.clone());
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                let da: Vec<f64> = g.data().iter().zip(vb.data()).map(|(g, y)| g * y).collect();
                let db: Vec<f64> = g.data().iter().zip(va.data()).map(|(g, x)| g * x).collect();
                accum(
                    grads,
                    nodes,
                    *a,
                    Tensor::new(va.shape().to_vec(), da).expect("mul grad"),
                );
                accum(
                    grads,
                    nodes,
                    *b,
                    Tensor::new(vb.shape().to_vec(), db).expect("mul grad"),
                );
            }
            Op::OneMinus(x) => {
                let data = g.data().iter().map(|v| -v).collect();
                let vx = &nodes[x.0].value;
                accum(
                    grads,
                    nodes,
                    *x,
                    Tensor::new(vx.shape().to_vec(), data).expect("oneminus grad"),
                );
            }
            Op::Scale(x, c) => {
                let data = g.data().iter().map(|v| c * v).collect();
                let vx = &nodes[x.0].value;
                accum(
                    grads,
                    nodes,
                    *x,
                    Tensor::new(vx.shape().to_vec(), data).expect("scale grad"),
                );
            }
            Op::Matmul(a, b) => {
                let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                let (n, p, q) = (va.rows(), va.cols(), vb.cols());
                if nodes[a.0].requires_grad {
                    // dA = G B^T
                    let mut da = vec![0.0; n * p];
                    for i in 0..n {
                        for k in 0..p {
                            let brow = vb.row(k);
                            let grow = &g.data()[i * q..(i + 1) * q];
                            let mut acc = 0.0;
                            for j in 0..q {
                                acc += grow[j] * brow[j];
                            }
                            da[i * p + k] = acc;
                        }
                    }
                    accum(
                        grads,
                        nodes,
                        *a,
                        Tensor::new(vec![n, p], da).expect("matmul grad a"),
                    );
                }
                if nodes[b.0].requires_grad {
                    // dB = A^T G
                    let mut db = vec![0.0; p * q];
                    for i in 0..n {
                        let arow = va.row(i);
                        let grow = &g.data()[i * q..(i + 1) * q];
                        for k in 0..p {
                            let aik = arow[k];
                            if aik == 0.0 {
                                continue;
                            }
                            for j in 0..q {
                                db[k * q + j] += aik * grow[j];
                            }
                        }
                    }
                    accum(
                        grads,
                        nodes,
                        *b,
                        Tensor::new(vec![p, q], db).expect("matmul grad b"),
                    );
                }
            }
            Op::VecMat(v, m) => {
                let (vv, vm) = (&nodes[v.0].value, &nodes[m.0].value);
                let (p, q) = (vm.rows(), vm.cols());
                if nodes[v.0].requires_grad {
                    let mut dv = vec![0.0; p];
                    for k in 0..p {
                        let row = vm.row(k);
                        let mut acc = 0.0;
                        for j in 0..q {
                            acc += row[j] * g.data()[j];
                        }
                        dv[k] = acc;
                    }
                    accum(grads, nodes, *v, Tensor::vector(dv));
                }
                if nodes[m.0].requires_grad {
                    let mut dm = vec![0.0; p * q];
                    for (k, &x) in vv.data().iter().enumerate() {
                        if x == 0.0 {
                            continue;
                        }
                        for j in 0..q {
                            dm[k * q + j] = x * g.data()[j];
                        }
                    }
                    accum(
                        grads,
                        nodes,
                        *m,
                        Tensor::new(vec![p, q], dm).expect("vecmat grad"),
                    );
                }
            }
            Op::AddBias(x, b) => {
                let vx = &nodes[x.0].value;
                let (n, q) = (vx.rows(), vx.cols());
                accum(grads, nodes, *x, g.clone());
                if nodes[b.0].requires_grad {
                    let mut db = vec![0.0; q];
                    for i in 0..n {
                        for j in 0..q {
                            db[j] += g.data()[i * q + j];
                        }
                    }
                    accum(grads, nodes, *b, Tensor::vector(db));
                }
            }
            Op::Tanh(x) => {
                let y = &nodes[node].value;
                let data = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(g, y)| g * (1.0 - y * y))
                    .collect();
                accum(
                    grads,
                    nodes,
                    *x,
                    Tensor::new(y.shape().to_vec(), data).expect("tanh grad"),
                );
            }
            Op::Sigmoid(x) => {
                let y = &nodes[node].value;
                let data = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(g, y)| g * y * (1.0 - y))
                    .collect();
                accum(
                    grads,
                    nodes,
                    *x,
                    Tensor::new(y.shape().to_vec(), data).expect("sigmoid grad"),
                );
            }
            Op::SoftmaxRows(x) => {
                let y = &nodes[node].value;
                let (rows, cols) = match y.shape() {
                    [c] => (1, *c),
                    [r, c] => (*r, *c),
                    _ => unreachable!("softmax rank"),
                };
                let mut data = vec![0.0; rows * cols];
                for r in 0..rows {
                    let yr = &y.data()[r * cols..(r + 1) * cols];
                    let gr = &g.data()[r * cols..(r + 1) * cols];
                    let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                    for j in 0..cols {
                        data[r * cols + j] = yr[j] * (gr[j] - dot);
                    }
                }
                accum(
                    grads,
                    nodes,
                    *x,
                    Tensor::new(y.shape().to_vec(), data).expect("softmax grad"),
                );
            }
            Op::Dropout { x, mask } => {
                let data = g.data().iter().zip(mask).map(|(g, m)| g * m).collect();
                let vx = &nodes[x.0].value;
                accum(
                    grads,
                    nodes,
                    *x,
                    Tensor::new(vx.shape().to_vec(), data).expect("dropout grad"),
                );
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = nodes[p.0].value.len();
                    let data = g.data()[offset..offset + len].to_vec();
                    accum(grads, nodes, *p, Tensor::vector(data));
                    offset += len;
                }
            }
            Op::StackRows(rows) => {
                let cols = nodes[rows[0].0].value.len();
                for (i, r) in rows.iter().enumerate() {
                    let data = g.data()[i * cols..(i + 1) * cols].to_vec();
                    accum(grads, nodes, *r, Tensor::vector(data));
                }
            }
            Op::RowOf(x, i) => {
                let vx = &nodes[x.0].value;
                let mut data = vec![0.0; vx.len()];
                let cols = vx.cols();
                data[i * cols..(i + 1) * cols].copy_from_slice(g.data());
                accum(
                    grads,
                    nodes,
                    *x,
                    Tensor::new(vx.shape().to_vec(), data).expect("row grad"),
                );
            }
            Op::PadRows { x, orig_rows } => {
                let vx = &nodes[x.0].value;
                let cols = vx.cols();
                let data = g.data()[..orig_rows * cols].to_vec();
                accum(
                    grads,
                    nodes,
                    *x,
                    Tensor::new(vec![*orig_rows, cols], data).expect("pad grad"),
                );
            }
            Op::MaxPoolRows { x, argmax } => {
                let vx = &nodes[x.0].value;
                let cols = vx.cols();
                let mut data = vec![0.0; vx.len()];
                for (j, &row) in argmax.iter().enumerate() {
                    data[row * cols + j] += g.data()[j];
                }
                accum(
                    grads,
                    nodes,
                    *x,
                    Tensor::new(vx.shape().to_vec(), data).expect("pool grad"),
                );
            }
            Op::GatherRows { table, idx } => {
                let vt = &nodes[table.0].value;
                let cols = vt.cols();
                let mut data = vec![0.0; vt.len()];
                for (out_row, &t_row) in idx.iter().enumerate() {
                    for j in 0..cols {
                        data[t_row * cols + j] += g.data()[out_row * cols + j];
                    }
                }
                accum(
                    grads,
                    nodes,
                    *table,
                    Tensor::new(vt.shape().to_vec(), data).expect("gather grad"),
                );
            }
            Op::Conv1d { x, w, b, window } => {
                let (vx, vw) = (&nodes[x.0].value, &nodes[w.0].value);
                let (n, d) = (vx.rows(), vx.cols());
                let maps = vw.cols();
                let positions = n - window + 1;
                if nodes[x.0].requires_grad {
                    let mut dx = vec![0.0; n * d];
                    for t in 0..positions {
                        let grow = &g.data()[t * maps..(t + 1) * maps];
                        for j in 0..*window {
                            for k in 0..d {
                                let wrow = vw.row(j * d + k);
                                let mut acc = 0.0;
                                for m in 0..maps {
                                    acc += grow[m] * wrow[m];
                                }
                                dx[(t + j) * d + k] += acc;
                            }
                        }
                    }
                    accum(
                        grads,
                        nodes,
                        *x,
                        Tensor::new(vec![n, d], dx).expect("conv grad x"),
                    );
                }
                if nodes[w.0].requires_grad {
                    let mut dw = vec![0.0; window * d * maps];
                    for t in 0..positions {
                        let grow = &g.data()[t * maps..(t + 1) * maps];
                        for j in 0..*window {
                            let xrow = vx.row(t + j);
                            for (k, &xv) in xrow.iter().enumerate() {
                                if xv == 0.0 {
                                    continue;
                                }
                                for m in 0..maps {
                                    dw[(j * d + k) * maps + m] += xv * grow[m];
                                }
                            }
                        }
                    }
                    accum(
                        grads,
                        nodes,
                        *w,
                        Tensor::new(vec![window * d, maps], dw).expect("conv grad w"),
                    );
                }
                if nodes[b.0].requires_grad {
                    let mut db = vec![0.0; maps];
                    for t in 0..positions {
                        for m in 0..maps {
                            db[m] += g.data()[t * maps + m];
                        }
                    }
                    accum(grads, nodes, *b, Tensor::vector(db));
                }
            }
            Op::CrossEntropy { probs, target } => {
                let vp = &nodes[probs.0].value;
                let gs = g.item();
                let data = vp
                    .data()
                    .iter()
                    .zip(target)
                    .map(|(&p, &t)| if t == 0.0 { 0.0 } else { -gs * t / p })
                    .collect();
                accum(grads, nodes, *probs, Tensor::vector(data));
            }
            Op::MaskedNllSum {
                probs,
                classes,
                mask,
            } => {
                let vp = &nodes[probs.0].value;
                let cols = vp.cols();
                let gs = g.item();
                let mut data = vec![0.0; vp.len()];
                for i in 0..vp.rows() {
                    if mask[i] {
                        let c = classes[i];
                        data[i * cols + c] = -gs / vp.get2(i, c);
                    }
                }
                accum(
                    grads,
                    nodes,
                    *probs,
                    Tensor::new(vp.shape().to_vec(), data).expect("nll grad"),
                );
            }
            Op::SumAll(x) => {
                let vx = &nodes[x.0].value;
                let data = vec![g.item(); vx.len()];
                accum(
                    grads,
                    nodes,
                    *x,
                    Tensor::new(vx.shape().to_vec(), data).expect("sum grad"),
                );
            }
        }
    }
}
