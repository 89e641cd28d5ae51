//! Reverse-mode automatic differentiation over a fixed op set.
//!
//! A [`Tape`] records each primitive as it is evaluated (eager forward) and
//! can then push a scalar loss gradient backwards, accumulating gradients
//! for every registered parameter slot. The op set is exactly what the
//! similarity model needs: dense matrix products, row-bias addition,
//! ReLU/sigmoid, 3x3 same-padding convolution, 2x2 max-pooling, reshapes,
//! channel stacking, row concatenation, and squared error.

use super::NnError;
use crate::mat::Mat;
use serde::{Deserialize, Serialize};

/// Dense row-major tensor; rank 1-4 in practice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor { shape: vec![1, 1], data: vec![v] }
    }

    pub fn from_mat(m: &Mat) -> Tensor {
        Tensor { shape: vec![m.rows(), m.cols()], data: m.data().to_vec() }
    }

    pub fn to_mat(&self) -> Mat {
        assert_eq!(self.shape.len(), 2, "tensor is not a matrix");
        Mat::from_vec(self.shape[0], self.shape[1], self.data.clone())
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn scalar_value(&self) -> f64 {
        assert_eq!(self.numel(), 1, "tensor is not a scalar");
        self.data[0]
    }
}

pub type NodeId = usize;

#[derive(Clone, Debug)]
enum Op {
    Const,
    Param { slot: usize },
    /// C = A·B
    MatMul { a: NodeId, b: NodeId },
    /// C = A·Bᵀ
    MatMulTB { a: NodeId, b: NodeId },
    /// y = x + broadcast rows of b (b is 1×c)
    AddRowBias { x: NodeId, b: NodeId },
    Relu { x: NodeId },
    Sigmoid { x: NodeId },
    /// Same-padding 3x3 convolution with per-channel bias.
    Conv3x3 { x: NodeId, w: NodeId, b: NodeId },
    /// 2x2 max-pool, stride 2, floor semantics.
    MaxPool2 { x: NodeId },
    Reshape { x: NodeId },
    /// Stack k equal-side matrices into a [k, s, s] tensor.
    StackChannels { xs: Vec<NodeId> },
    /// Concatenate 1×k_i row vectors into one row.
    ConcatRow { xs: Vec<NodeId> },
    /// (a − b)² for two scalars.
    SquaredError { a: NodeId, b: NodeId },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Records a forward computation and differentiates it in reverse.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(what: &str, detail: String) -> NnError {
    NnError::Shape(format!("{what}: {detail}"))
}

impl Tape {
    pub fn new() -> Tape {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    pub fn mat(&self, id: NodeId) -> Mat {
        self.value(id).to_mat()
    }

    pub fn constant(&mut self, t: Tensor) -> NodeId {
        self.push(Op::Const, t)
    }

    pub fn constant_mat(&mut self, m: &Mat) -> NodeId {
        self.constant(Tensor::from_mat(m))
    }

    /// Registers the current value of parameter slot `slot`; gradients
    /// accumulate per slot in [`Tape::backward`].
    pub fn param(&mut self, slot: usize, value: &Tensor) -> NodeId {
        self.push(Op::Param { slot }, value.clone())
    }

    fn mat2(&self, id: NodeId, what: &str) -> Result<(usize, usize), NnError> {
        let s = &self.value(id).shape;
        if s.len() != 2 {
            return Err(shape_err(what, format!("expected matrix, got shape {s:?}")));
        }
        Ok((s[0], s[1]))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let (m, k) = self.mat2(a, "matmul lhs")?;
        let (k2, _n) = self.mat2(b, "matmul rhs")?;
        if k != k2 {
            return Err(shape_err("matmul", format!("inner dims {k} vs {k2}")));
        }
        let value = self.value(a).to_mat().matmul(&self.value(b).to_mat());
        let _ = m;
        Ok(self.push(Op::MatMul { a, b }, Tensor::from_mat(&value)))
    }

    pub fn matmul_tb(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let (_m, k) = self.mat2(a, "matmul_tb lhs")?;
        let (_n, k2) = self.mat2(b, "matmul_tb rhs")?;
        if k != k2 {
            return Err(shape_err("matmul_tb", format!("inner dims {k} vs {k2}")));
        }
        let value =
            self.value(a).to_mat().matmul_transpose_b(&self.value(b).to_mat());
        Ok(self.push(Op::MatMulTB { a, b }, Tensor::from_mat(&value)))
    }

    pub fn add_row_bias(&mut self, x: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let (_r, c) = self.mat2(x, "add_row_bias input")?;
        let (br, bc) = self.mat2(b, "add_row_bias bias")?;
        if br != 1 || bc != c {
            return Err(shape_err("add_row_bias", format!("bias {br}x{bc} vs cols {c}")));
        }
        let mut value = self.value(x).clone();
        let bias = &self.value(b).data;
        for row in value.data.chunks_mut(c) {
            for (y, add) in row.iter_mut().zip(bias) {
                *y += add;
            }
        }
        Ok(self.push(Op::AddRowBias { x, b }, value))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let mut value = self.value(x).clone();
        for v in value.data.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self.push(Op::Relu { x }, value)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let mut value = self.value(x).clone();
        for v in value.data.iter_mut() {
            *v = 1.0 / (1.0 + (-*v).exp());
        }
        self.push(Op::Sigmoid { x }, value)
    }

    pub fn conv3x3(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let xs = self.value(x).shape.clone();
        let ws = self.value(w).shape.clone();
        let bs = self.value(b).shape.clone();
        if xs.len() != 3 {
            return Err(shape_err("conv3x3 input", format!("expected [c,s,s], got {xs:?}")));
        }
        let (c_in, side) = (xs[0], xs[1]);
        if xs[2] != side {
            return Err(shape_err("conv3x3 input", format!("not square: {xs:?}")));
        }
        if ws != vec![ws[0], c_in, 3, 3] {
            return Err(shape_err(
                "conv3x3 kernel",
                format!("expected [co,{c_in},3,3], got {ws:?}"),
            ));
        }
        let c_out = ws[0];
        if bs != vec![c_out] {
            return Err(shape_err("conv3x3 bias", format!("expected [{c_out}], got {bs:?}")));
        }
        let xv = &self.value(x).data;
        let wv = &self.value(w).data;
        let bv = &self.value(b).data;
        let mut out = Tensor::zeros(&[c_out, side, side]);
        for co in 0..c_out {
            for i in 0..side {
                for j in 0..side {
                    let mut acc = bv[co];
                    for ci in 0..c_in {
                        for di in 0..3 {
                            let ii = i as isize + di as isize - 1;
                            if ii < 0 || ii >= side as isize {
                                continue;
                            }
                            for dj in 0..3 {
                                let jj = j as isize + dj as isize - 1;
                                if jj < 0 || jj >= side as isize {
                                    continue;
                                }
                                acc += xv[(ci * side + ii as usize) * side + jj as usize]
                                    * wv[((co * c_in + ci) * 3 + di) * 3 + dj];
                            }
                        }
                    }
                    out.data[(co * side + i) * side + j] = acc;
                }
            }
        }
        Ok(self.push(Op::Conv3x3 { x, w, b }, out))
    }

    pub fn max_pool2(&mut self, x: NodeId) -> Result<NodeId, NnError> {
        let xs = self.value(x).shape.clone();
        if xs.len() != 3 || xs[1] != xs[2] || xs[1] < 2 {
            return Err(shape_err("max_pool2", format!("expected [c,s,s], s>=2, got {xs:?}")));
        }
        let (c, side) = (xs[0], xs[1]);
        let out_side = side / 2;
        let xv = &self.value(x).data;
        let mut out = Tensor::zeros(&[c, out_side, out_side]);
        for ch in 0..c {
            for i in 0..out_side {
                for j in 0..out_side {
                    let mut best = f64::NEG_INFINITY;
                    for di in 0..2 {
                        for dj in 0..2 {
                            let v = xv[(ch * side + 2 * i + di) * side + 2 * j + dj];
                            if v > best {
                                best = v;
                            }
                        }
                    }
                    out.data[(ch * out_side + i) * out_side + j] = best;
                }
            }
        }
        Ok(self.push(Op::MaxPool2 { x }, out))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId, NnError> {
        let numel: usize = shape.iter().product();
        if numel != self.value(x).numel() {
            return Err(shape_err(
                "reshape",
                format!("{:?} -> {shape:?} changes element count", self.value(x).shape),
            ));
        }
        let value = Tensor { shape: shape.to_vec(), data: self.value(x).data.clone() };
        Ok(self.push(Op::Reshape { x }, value))
    }

    pub fn stack_channels(&mut self, xs: &[NodeId]) -> Result<NodeId, NnError> {
        if xs.is_empty() {
            return Err(shape_err("stack_channels", "no inputs".into()));
        }
        let (r, c) = self.mat2(xs[0], "stack_channels input")?;
        if r != c {
            return Err(shape_err("stack_channels", format!("not square: {r}x{c}")));
        }
        let mut data = Vec::with_capacity(xs.len() * r * c);
        for &x in xs {
            let (r2, c2) = self.mat2(x, "stack_channels input")?;
            if (r2, c2) != (r, c) {
                return Err(shape_err("stack_channels", format!("{r2}x{c2} vs {r}x{c}")));
            }
            data.extend_from_slice(&self.value(x).data);
        }
        let value = Tensor { shape: vec![xs.len(), r, c], data };
        Ok(self.push(Op::StackChannels { xs: xs.to_vec() }, value))
    }

    pub fn concat_row(&mut self, xs: &[NodeId]) -> Result<NodeId, NnError> {
        if xs.is_empty() {
            return Err(shape_err("concat_row", "no inputs".into()));
        }
        let mut data = Vec::new();
        for &x in xs {
            let (r, _c) = self.mat2(x, "concat_row input")?;
            if r != 1 {
                return Err(shape_err("concat_row", format!("expected row vector, got {r} rows")));
            }
            data.extend_from_slice(&self.value(x).data);
        }
        let value = Tensor { shape: vec![1, data.len()], data };
        Ok(self.push(Op::ConcatRow { xs: xs.to_vec() }, value))
    }

    pub fn squared_error(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        if self.value(a).numel() != 1 || self.value(b).numel() != 1 {
            return Err(shape_err("squared_error", "inputs must be scalars".into()));
        }
        let d = self.value(a).data[0] - self.value(b).data[0];
        Ok(self.push(Op::SquaredError { a, b }, Tensor::scalar(d * d)))
    }

    /// Reverse-mode sweep from a scalar `loss`; returns gradient tensors per
    /// parameter slot (`None` for slots never touched by this tape).
    pub fn backward(
        &self,
        loss: NodeId,
        n_slots: usize,
    ) -> Result<Vec<Option<Tensor>>, NnError> {
        if self.value(loss).numel() != 1 {
            return Err(shape_err("backward", "loss must be a scalar".into()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss] = Some(Tensor::scalar(1.0));
        let mut slot_grads: Vec<Option<Tensor>> = vec![None; n_slots];

        for id in (0..=loss).rev() {
            let Some(grad) = grads[id].take() else { continue };
            match &self.nodes[id].op {
                Op::Const => {}
                Op::Param { slot } => {
                    accumulate(&mut slot_grads[*slot], &grad);
                }
                Op::MatMul { a, b } => {
                    let dc = grad.to_mat();
                    let av = self.value(*a).to_mat();
                    let bv = self.value(*b).to_mat();
                    let da = dc.matmul_transpose_b(&bv);
                    let db = av.transpose().matmul(&dc);
                    accumulate(&mut grads[*a], &Tensor::from_mat(&da));
                    accumulate(&mut grads[*b], &Tensor::from_mat(&db));
                }
                Op::MatMulTB { a, b } => {
                    // C = A·Bᵀ: dA = dC·B, dB = dCᵀ·A
                    let dc = grad.to_mat();
                    let av = self.value(*a).to_mat();
                    let bv = self.value(*b).to_mat();
                    let da = dc.matmul(&bv);
                    let db = dc.transpose().matmul(&av);
                    accumulate(&mut grads[*a], &Tensor::from_mat(&da));
                    accumulate(&mut grads[*b], &Tensor::from_mat(&db));
                }
                Op::AddRowBias { x, b } => {
                    accumulate(&mut grads[*x], &grad);
                    let c = self.value(*b).shape[1];
                    let mut db = Tensor::zeros(&[1, c]);
                    for row in grad.data.chunks(c) {
                        for (g, add) in db.data.iter_mut().zip(row) {
                            *g += add;
                        }
                    }
                    accumulate(&mut grads[*b], &db);
                }
                Op::Relu { x } => {
                    let mut dx = grad.clone();
                    // Subgradient 0 at exactly 0.
                    for (g, &v) in dx.data.iter_mut().zip(&self.value(*x).data) {
                        if v <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    accumulate(&mut grads[*x], &dx);
                }
                Op::Sigmoid { x } => {
                    let mut dx = grad.clone();
                    for (g, &s) in dx.data.iter_mut().zip(&self.nodes[id].value.data) {
                        *g *= s * (1.0 - s);
                    }
                    accumulate(&mut grads[*x], &dx);
                }
                Op::Conv3x3 { x, w, b } => {
                    let xs = &self.value(*x).shape;
                    let ws = &self.value(*w).shape;
                    let (c_in, side) = (xs[0], xs[1]);
                    let c_out = ws[0];
                    let xv = &self.value(*x).data;
                    let wv = &self.value(*w).data;
                    let mut dx = Tensor::zeros(xs);
                    let mut dw = Tensor::zeros(ws);
                    let mut db = Tensor::zeros(&[c_out]);
                    for co in 0..c_out {
                        for i in 0..side {
                            for j in 0..side {
                                let g = grad.data[(co * side + i) * side + j];
                                db.data[co] += g;
                                for ci in 0..c_in {
                                    for di in 0..3 {
                                        let ii = i as isize + di as isize - 1;
                                        if ii < 0 || ii >= side as isize {
                                            continue;
                                        }
                                        for dj in 0..3 {
                                            let jj = j as isize + dj as isize - 1;
                                            if jj < 0 || jj >= side as isize {
                                                continue;
                                            }
                                            let xi = (ci * side + ii as usize) * side
                                                + jj as usize;
                                            let wi = ((co * c_in + ci) * 3 + di) * 3 + dj;
                                            dx.data[xi] += g * wv[wi];
                                            dw.data[wi] += g * xv[xi];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    accumulate(&mut grads[*x], &dx);
                    accumulate(&mut grads[*w], &dw);
                    accumulate(&mut grads[*b], &db);
                }
                Op::MaxPool2 { x } => {
                    let xs = &self.value(*x).shape;
                    let (c, side) = (xs[0], xs[1]);
                    let out_side = side / 2;
                    let xv = &self.value(*x).data;
                    let mut dx = Tensor::zeros(xs);
                    for ch in 0..c {
                        for i in 0..out_side {
                            for j in 0..out_side {
                                // First maximum wins, matching the forward.
                                let mut best = f64::NEG_INFINITY;
                                let mut best_idx = 0;
                                for di in 0..2 {
                                    for dj in 0..2 {
                                        let idx =
                                            (ch * side + 2 * i + di) * side + 2 * j + dj;
                                        if xv[idx] > best {
                                            best = xv[idx];
                                            best_idx = idx;
                                        }
                                    }
                                }
                                dx.data[best_idx] +=
                                    grad.data[(ch * out_side + i) * out_side + j];
                            }
                        }
                    }
                    accumulate(&mut grads[*x], &dx);
                }
                Op::Reshape { x } => {
                    let dx = Tensor {
                        shape: self.value(*x).shape.clone(),
                        data: grad.data.clone(),
                    };
                    accumulate(&mut grads[*x], &dx);
                }
                Op::StackChannels { xs } => {
                    let per = grad.data.len() / xs.len();
                    for (k, &x) in xs.iter().enumerate() {
                        let dx = Tensor {
                            shape: self.value(x).shape.clone(),
                            data: grad.data[k * per..(k + 1) * per].to_vec(),
                        };
                        accumulate(&mut grads[x], &dx);
                    }
                }
                Op::ConcatRow { xs } => {
                    let mut offset = 0;
                    for &x in xs {
                        let len = self.value(x).numel();
                        let dx = Tensor {
                            shape: self.value(x).shape.clone(),
                            data: grad.data[offset..offset + len].to_vec(),
                        };
                        accumulate(&mut grads[x], &dx);
                        offset += len;
                    }
                }
                Op::SquaredError { a, b } => {
                    let d = self.value(*a).data[0] - self.value(*b).data[0];
                    let g = grad.data[0];
                    accumulate(&mut grads[*a], &Tensor::scalar(2.0 * d * g));
                    accumulate(&mut grads[*b], &Tensor::scalar(-2.0 * d * g));
                }
            }
        }
        Ok(slot_grads)
    }
}

fn accumulate(slot: &mut Option<Tensor>, grad: &Tensor) {
    match slot {
        Some(existing) => {
            debug_assert_eq!(existing.shape, grad.shape);
            for (a, b) in existing.data.iter_mut().zip(&grad.data) {
                *a += b;
            }
        }
        None => *slot = Some(grad.clone()),
    }
}

/// Central finite differences of a scalar function with respect to each
/// parameter tensor (for gradient checking).
pub fn numeric_gradient(
    params: &[Tensor],
    eps: f64,
    f: impl Fn(&[Tensor]) -> f64,
) -> Vec<Tensor> {
    let mut grads = Vec::with_capacity(params.len());
    let mut work = params.to_vec();
    for p in 0..params.len() {
        let mut g = Tensor::zeros(&params[p].shape);
        for i in 0..params[p].numel() {
            let orig = work[p].data[i];
            work[p].data[i] = orig + eps;
            let hi = f(&work);
            work[p].data[i] = orig - eps;
            let lo = f(&work);
            work[p].data[i] = orig;
            g.data[i] = (hi - lo) / (2.0 * eps);
        }
        grads.push(g);
    }
    grads
}

/// Largest elementwise relative error between analytic gradients (per slot,
/// `None` meaning zero) and a numeric reference, with denominators floored
/// at 1 so near-zero entries compare absolutely.
pub fn max_relative_gradient_error(analytic: &[Option<Tensor>], numeric: &[Tensor]) -> f64 {
    let mut worst: f64 = 0.0;
    for (slot, num) in numeric.iter().enumerate() {
        let zero = Tensor::zeros(&num.shape);
        let ana = analytic[slot].as_ref().unwrap_or(&zero);
        for (&a, &n) in ana.data.iter().zip(&num.data) {
            let denom = a.abs().max(n.abs()).max(1.0);
            worst = worst.max((a - n).abs() / denom);
        }
    }
    worst
}
