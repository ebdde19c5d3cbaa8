//! Append-only operation tape with reverse-mode gradient replay.

use super::kernels::{self, AttentionGeometry, ConvGeometry};
use super::Tensor;
use crate::error::{contract, shape_err, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Minimum(Var, Var),
    AddRowBias(Var, Var),
    AddChannelBias(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Clamp(Var, f64, f64),
    Softmax(Var, usize),
    LogSoftmax(Var),
    Sum(Var),
    Mean(Var),
    Reshape(Var),
    Concat { parts: Vec<Var>, axis: usize },
    SliceCols { x: Var, start: usize },
    Gather { x: Var, index: Vec<usize> },
    Conv2d { input: Var, kernels: Var, geom: ConvGeometry },
    Attention { q: Var, k: Var, v: Var, geom: AttentionGeometry, weights: Vec<f64> },
    MeanPool { x: Var, batch: usize, seq: usize, mask: Option<Vec<bool>> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records every operation of a forward pass. Inputs always precede
/// their consumers, so a reverse sweep is a valid topological order.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradient of a scalar loss with respect to every node of a tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `var`; zero when the node was not reachable from the loss.
    pub fn get(&self, var: Var) -> Tensor {
        let shape = &self.shapes[var.0];
        match &self.grads[var.0] {
            Some(g) => Tensor::new(shape.clone(), g.clone()).expect("gradient matches node shape"),
            None => Tensor::zeros(shape),
        }
    }

    pub fn is_reachable(&self, var: Var) -> bool {
        self.grads[var.0].is_some()
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

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A leaf that receives gradients.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf treated as a constant.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = kernels::matmul(self.value(a), self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return shape_err(format!("{what}: shapes {sa:?} and {sb:?} differ"));
        }
        Ok(())
    }

    fn zip(&mut self, a: Var, b: Var, what: &str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        self.same_shape(a, b, what)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// Elementwise minimum; ties send the gradient to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "minimum", f64::min, Op::Minimum(a, b))
    }

    /// `x[m,n] + bias[n]` broadcast over rows.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (_, n) = self.value(x).dims2()?;
        if self.value(bias).len() != n {
            return shape_err(format!(
                "row bias of shape {:?} does not fit {:?}",
                self.value(bias).shape(),
                self.value(x).shape()
            ));
        }
        let b = self.value(bias).data().to_vec();
        let mut out = self.value(x).clone();
        for row in out.data_mut().chunks_mut(n) {
            row.iter_mut().zip(&b).for_each(|(o, bv)| *o += bv);
        }
        let rg = self.rg(&[x, bias]);
        Ok(self.push(out, Op::AddRowBias(x, bias), rg))
    }

    /// `x[c,h,w] + bias[c]` broadcast over each channel plane.
    pub fn add_channel_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let shape = self.value(x).shape().to_vec();
        if shape.len() != 3 || self.value(bias).len() != shape[0] {
            return shape_err(format!(
                "channel bias of shape {:?} does not fit {shape:?}",
                self.value(bias).shape()
            ));
        }
        let plane = shape[1] * shape[2];
        let b = self.value(bias).data().to_vec();
        let mut out = self.value(x).clone();
        for (c, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
            chunk.iter_mut().for_each(|o| *o += b[c]);
        }
        let rg = self.rg(&[x, bias]);
        Ok(self.push(out, Op::AddChannelBias(x, bias), rg))
    }

    fn map(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let v = self.value(x);
        let data = v.data().iter().map(|&a| f(a)).collect();
        let out = Tensor::new(v.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(&[x]);
        self.push(out, op, rg)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.map(x, |a| a * c, Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        self.map(x, |a| a + c, Op::AddScalar(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, |a| a.max(0.0), Op::Relu(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, f64::tanh, Op::Tanh(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.map(x, f64::exp, Op::Exp(x))
    }

    /// Clamp into `[lo, hi]`; gradient passes only strictly inside.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        self.map(x, |a| a.clamp(lo, hi), Op::Clamp(x, lo, hi))
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let out = kernels::softmax(self.value(x), axis)?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::Softmax(x, axis), rg))
    }

    /// Log-softmax over the last axis.
    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        if !v.is_finite() {
            return Err(crate::Error::Numeric("log_softmax"));
        }
        let n = *v.shape().last().expect("non-empty shape");
        let mut out = v.clone();
        for row in out.data_mut().chunks_mut(n) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|a| (a - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|a| *a -= lse);
        }
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::LogSoftmax(x), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.data().iter().sum::<f64>() / v.len() as f64;
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::Mean(x), rg)
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let out = self.value(x).reshaped(shape)?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::Reshape(x), rg))
    }

    /// Concatenates matrices along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        if parts.is_empty() || axis > 1 {
            return shape_err("concat needs at least one part and axis 0 or 1");
        }
        let dims: Vec<(usize, usize)> =
            parts.iter().map(|&p| self.value(p).dims2()).collect::<Result<_>>()?;
        let (rows, cols) = if axis == 0 {
            if dims.iter().any(|d| d.1 != dims[0].1) {
                return shape_err(format!("concat rows: column counts differ {dims:?}"));
            }
            (dims.iter().map(|d| d.0).sum(), dims[0].1)
        } else {
            if dims.iter().any(|d| d.0 != dims[0].0) {
                return shape_err(format!("concat cols: row counts differ {dims:?}"));
            }
            (dims[0].0, dims.iter().map(|d| d.1).sum())
        };
        let mut data = Vec::with_capacity(rows * cols);
        if axis == 0 {
            for &p in parts {
                data.extend_from_slice(self.value(p).data());
            }
        } else {
            for r in 0..rows {
                for (&p, &(_, c)) in parts.iter().zip(&dims) {
                    data.extend_from_slice(&self.value(p).data()[r * c..(r + 1) * c]);
                }
            }
        }
        let out = Tensor::new(vec![rows, cols], data)?;
        let rg = self.rg(parts);
        Ok(self.push(out, Op::Concat { parts: parts.to_vec(), axis }, rg))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2()?;
        if len == 0 || start + len > cols {
            return shape_err(format!("column slice {start}..{} out of range for {cols} columns", start + len));
        }
        let src = self.value(x).data();
        let data = (0..rows)
            .flat_map(|r| src[r * cols + start..r * cols + start + len].iter().copied())
            .collect();
        let out = Tensor::new(vec![rows, len], data)?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::SliceCols { x, start }, rg))
    }

    /// Picks `x[r, index[r]]` for every row, giving shape `[rows]`.
    pub fn gather(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2()?;
        if index.len() != rows || index.iter().any(|&i| i >= cols) {
            return shape_err(format!("gather index {index:?} invalid for {rows}x{cols}"));
        }
        let src = self.value(x).data();
        let data = index.iter().enumerate().map(|(r, &c)| src[r * cols + c]).collect();
        let out = Tensor::new(vec![rows], data)?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::Gather { x, index: index.to_vec() }, rg))
    }

    pub fn conv2d(&mut self, input: Var, kernels: Var, stride: usize, padding: usize) -> Result<Var> {
        let geom = ConvGeometry::new(self.value(input).shape(), self.value(kernels).shape(), stride, padding)?;
        let out = kernels::conv2d(self.value(input), self.value(kernels), stride, padding)?;
        let rg = self.rg(&[input, kernels]);
        Ok(self.push(out, Op::Conv2d { input, kernels, geom }, rg))
    }

    /// Batched multi-head scaled dot-product attention; see
    /// [`kernels::attention`] for the layout.
    pub fn attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        batch: usize,
        heads: usize,
        key_mask: Option<&[bool]>,
    ) -> Result<Var> {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let geom = AttentionGeometry::new(qv.shape(), kv.shape(), vv.shape(), batch, heads)?;
        let (out, weights) = kernels::attention(qv, kv, vv, batch, heads, key_mask)?;
        let rg = self.rg(&[q, k, v]);
        Ok(self.push(out, Op::Attention { q, k, v, geom, weights }, rg))
    }

    /// Average of `x[batch*seq, d]` over each sequence, skipping masked
    /// rows. A sequence with no valid rows pools to zero.
    pub fn mean_pool(&mut self, x: Var, batch: usize, seq: usize, mask: Option<&[bool]>) -> Result<Var> {
        let (rows, d) = self.value(x).dims2()?;
        if batch * seq != rows || mask.is_some_and(|m| m.len() != rows) {
            return shape_err(format!("mean_pool: {rows} rows do not match batch {batch} x seq {seq}"));
        }
        let src = self.value(x).data();
        let mut out = vec![0.0; batch * d];
        for b in 0..batch {
            let valid: Vec<usize> = (0..seq)
                .map(|t| b * seq + t)
                .filter(|&r| mask.is_none_or(|m| m[r]))
                .collect();
            if valid.is_empty() {
                continue;
            }
            let inv = 1.0 / valid.len() as f64;
            for &r in &valid {
                for j in 0..d {
                    out[b * d + j] += src[r * d + j] * inv;
                }
            }
        }
        let out = Tensor::new(vec![batch, d], out)?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::MeanPool { x, batch, seq, mask: mask.map(<[bool]>::to_vec) }, rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if loss.0 >= self.nodes.len() {
            return contract("loss is not on this tape");
        }
        if self.value(loss).len() != 1 {
            return contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if self.nodes[idx].requires_grad {
                self.propagate(idx, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let nodes = &self.nodes;
        // Accumulates into the gradient slot of `v` when it needs one.
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()]);
            f(slot);
        };
        let val = |v: Var| nodes[v.0].value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = nodes[a.0].value.dims2().expect("matrix");
                let n = node.value.shape()[1];
                acc(*a, &mut |d| kernels::matmul_bt_into(g, val(*b), d, m, n, k));
                acc(*b, &mut |d| kernels::matmul_at_into(val(*a), g, d, m, k, n));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |d| add_into(d, g));
                acc(*b, &mut |d| add_into(d, g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |d| add_into(d, g));
                acc(*b, &mut |d| d.iter_mut().zip(g).for_each(|(x, y)| *x -= y));
            }
            Op::Mul(a, b) => {
                acc(*a, &mut |d| {
                    for ((x, y), z) in d.iter_mut().zip(g).zip(val(*b)) {
                        *x += y * z;
                    }
                });
                acc(*b, &mut |d| {
                    for ((x, y), z) in d.iter_mut().zip(g).zip(val(*a)) {
                        *x += y * z;
                    }
                });
            }
            Op::Minimum(a, b) => {
                let pick_a: Vec<bool> = val(*a).iter().zip(val(*b)).map(|(x, y)| x <= y).collect();
                acc(*a, &mut |d| {
                    for ((x, y), &p) in d.iter_mut().zip(g).zip(&pick_a) {
                        if p {
                            *x += y;
                        }
                    }
                });
                acc(*b, &mut |d| {
                    for ((x, y), &p) in d.iter_mut().zip(g).zip(&pick_a) {
                        if !p {
                            *x += y;
                        }
                    }
                });
            }
            Op::AddRowBias(x, b) => {
                acc(*x, &mut |d| add_into(d, g));
                let n = nodes[b.0].value.len();
                acc(*b, &mut |d| {
                    for row in g.chunks(n) {
                        add_into(d, row);
                    }
                });
            }
            Op::AddChannelBias(x, b) => {
                acc(*x, &mut |d| add_into(d, g));
                let s = node.value.shape();
                let plane = s[1] * s[2];
                acc(*b, &mut |d| {
                    for (c, chunk) in g.chunks(plane).enumerate() {
                        d[c] += chunk.iter().sum::<f64>();
                    }
                });
            }
            Op::Scale(x, c) => acc(*x, &mut |d| d.iter_mut().zip(g).for_each(|(a, y)| *a += c * y)),
            Op::AddScalar(x) | Op::Reshape(x) => acc(*x, &mut |d| add_into(d, g)),
            Op::Relu(x) => acc(*x, &mut |d| {
                for ((a, y), v) in d.iter_mut().zip(g).zip(val(*x)) {
                    if *v > 0.0 {
                        *a += y;
                    }
                }
            }),
            Op::Tanh(x) => acc(*x, &mut |d| {
                for ((a, y), t) in d.iter_mut().zip(g).zip(node.value.data()) {
                    *a += y * (1.0 - t * t);
                }
            }),
            Op::Exp(x) => acc(*x, &mut |d| {
                for ((a, y), e) in d.iter_mut().zip(g).zip(node.value.data()) {
                    *a += y * e;
                }
            }),
            Op::Clamp(x, lo, hi) => acc(*x, &mut |d| {
                for ((a, y), v) in d.iter_mut().zip(g).zip(val(*x)) {
                    if v > lo && v < hi {
                        *a += y;
                    }
                }
            }),
            Op::Softmax(x, axis) => {
                let (o, n, i) = kernels::axis_split(node.value.shape(), *axis).expect("axis checked");
                acc(*x, &mut |d| kernels::softmax_backward(node.value.data(), g, d, o, n, i));
            }
            Op::LogSoftmax(x) => {
                let n = *node.value.shape().last().expect("shape");
                acc(*x, &mut |d| {
                    for ((drow, grow), yrow) in d.chunks_mut(n).zip(g.chunks(n)).zip(node.value.data().chunks(n)) {
                        let gsum: f64 = grow.iter().sum();
                        for ((a, gy), y) in drow.iter_mut().zip(grow).zip(yrow) {
                            *a += gy - y.exp() * gsum;
                        }
                    }
                });
            }
            Op::Sum(x) => acc(*x, &mut |d| d.iter_mut().for_each(|a| *a += g[0])),
            Op::Mean(x) => {
                let inv = 1.0 / nodes[x.0].value.len() as f64;
                acc(*x, &mut |d| d.iter_mut().for_each(|a| *a += g[0] * inv));
            }
            Op::Concat { parts, axis } => {
                let cols = node.value.shape()[1];
                let mut offset = 0;
                for &p in parts {
                    let (pr, pc) = nodes[p.0].value.dims2().expect("matrix");
                    if *axis == 0 {
                        acc(p, &mut |d| add_into(d, &g[offset * cols..(offset + pr) * cols]));
                        offset += pr;
                    } else {
                        acc(p, &mut |d| {
                            for r in 0..pr {
                                add_into(&mut d[r * pc..(r + 1) * pc], &g[r * cols + offset..r * cols + offset + pc]);
                            }
                        });
                        offset += pc;
                    }
                }
            }
            Op::SliceCols { x, start } => {
                let cols = nodes[x.0].value.shape()[1];
                let len = node.value.shape()[1];
                acc(*x, &mut |d| {
                    for (r, grow) in g.chunks(len).enumerate() {
                        add_into(&mut d[r * cols + start..r * cols + start + len], grow);
                    }
                });
            }
            Op::Gather { x, index } => {
                let cols = nodes[x.0].value.shape()[1];
                acc(*x, &mut |d| {
                    for (r, &c) in index.iter().enumerate() {
                        d[r * cols + c] += g[r];
                    }
                });
            }
            Op::Conv2d { input, kernels: k, geom } => {
                let (xi, kv) = (val(*input), val(*k));
                acc(*input, &mut |d| kernels::conv2d_backward(geom, xi, kv, g, Some(d), None));
                acc(*k, &mut |d| kernels::conv2d_backward(geom, xi, kv, g, None, Some(d)));
            }
            Op::Attention { q, k, v, geom, weights } => {
                let (qs, ks, vs) = (val(*q).len(), val(*k).len(), val(*v).len());
                let (mut dq, mut dk, mut dv) = (vec![0.0; qs], vec![0.0; ks], vec![0.0; vs]);
                kernels::attention_backward(geom, val(*q), val(*k), val(*v), weights, g, &mut dq, &mut dk, &mut dv);
                acc(*q, &mut |d| add_into(d, &dq));
                acc(*k, &mut |d| add_into(d, &dk));
                acc(*v, &mut |d| add_into(d, &dv));
            }
            Op::MeanPool { x, batch, seq, mask } => {
                let d_width = node.value.shape()[1];
                acc(*x, &mut |d| {
                    for b in 0..*batch {
                        let rows: Vec<usize> = (0..*seq)
                            .map(|t| b * seq + t)
                            .filter(|&r| mask.as_ref().is_none_or(|m| m[r]))
                            .collect();
                        if rows.is_empty() {
                            continue;
                        }
                        let inv = 1.0 / rows.len() as f64;
                        for &r in &rows {
                            for j in 0..d_width {
                                d[r * d_width + j] += g[b * d_width + j] * inv;
                            }
                        }
                    }
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let x = t.variable(Tensor::scalar(3.0));
        let y = t.mul(x, x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).item(), 6.0);
    }

    #[test]
    fn independent_parameter_gets_zero() {
        let mut t = Tape::new();
        let x = t.variable(Tensor::scalar(2.0));
        let p = t.variable(Tensor::full(&[2, 2], 1.0));
        let y = t.scale(x, 5.0);
        let g = t.backward(y).unwrap();
        assert!(!g.is_reachable(p));
        assert_eq!(g.get(p), Tensor::zeros(&[2, 2]));
        assert_eq!(g.get(x).item(), 5.0);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut t = Tape::new();
        let x = t.variable(Tensor::zeros(&[2]));
        assert!(matches!(t.backward(x), Err(crate::Error::Contract(_))));
    }

    #[test]
    fn constants_are_recorded_without_gradient() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::from_rows(&[vec![1.0, 2.0]]));
        let b = t.constant(Tensor::from_rows(&[vec![3.0], vec![4.0]]));
        let c = t.matmul(a, b).unwrap();
        assert!(!t.requires_grad(c));
        assert_eq!(t.value(c).item(), 11.0);
    }
}
