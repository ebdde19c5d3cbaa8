//! Forward kernels on plain tensors, plus the matching vector-Jacobian
//! products used by the tape. All loops are naive and single-threaded.

use super::Tensor;
use crate::error::{shape_err, Error, Result};

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2()?;
    let (k2, n) = b.dims2()?;
    if k != k2 {
        return shape_err(format!(
            "matmul inner dimensions differ: {:?} x {:?}",
            a.shape(),
            b.shape()
        ));
    }
    let mut out = vec![0.0; m * n];
    matmul_into(a.data(), b.data(), &mut out, m, k, n);
    Tensor::new(vec![m, n], out)
}

/// `out += a[m,k] * b[k,n]`
pub(crate) fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out += a[m,k] * b[n,k]^T`
pub(crate) fn matmul_bt_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            out[i * n + j] += arow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `out += a[k,m]^T * b[k,n]`
pub(crate) fn matmul_at_into(a: &[f64], b: &[f64], out: &mut [f64], k: usize, m: usize, n: usize) {
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let av = a[p * m + i];
            if av == 0.0 {
                continue;
            }
            let row = &mut out[i * n..(i + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(input: &[usize], kernels: &[usize], stride: usize, padding: usize) -> Result<Self> {
        let (c, h, w) = match *input {
            [c, h, w] => (c, h, w),
            _ => return shape_err(format!("conv2d input must be c x h x w, got {input:?}")),
        };
        let (o, kc, kh, kw) = match *kernels {
            [o, kc, kh, kw] => (o, kc, kh, kw),
            _ => return shape_err(format!("conv2d kernels must be o x c x kh x kw, got {kernels:?}")),
        };
        if kc != c {
            return shape_err(format!(
                "conv2d kernel channels {kc} do not match input channels {c} ({input:?} vs {kernels:?})"
            ));
        }
        if stride == 0 {
            return shape_err("conv2d stride must be positive");
        }
        if kh > h + 2 * padding || kw > w + 2 * padding {
            return shape_err(format!(
                "conv2d kernel {kh}x{kw} larger than padded input {}x{}",
                h + 2 * padding,
                w + 2 * padding
            ));
        }
        Ok(Self {
            channels: c,
            height: h,
            width: w,
            out_channels: o,
            kernel_h: kh,
            kernel_w: kw,
            stride,
            padding,
            out_h: (h + 2 * padding - kh) / stride + 1,
            out_w: (w + 2 * padding - kw) / stride + 1,
        })
    }

    pub fn out_shape(&self) -> Vec<usize> {
        vec![self.out_channels, self.out_h, self.out_w]
    }

    /// Rows of the patch matrix: `channels * kernel_h * kernel_w`.
    pub fn patch_len(&self) -> usize {
        self.channels * self.kernel_h * self.kernel_w
    }

    pub fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Calls `f(patch_row, out_position, input_index)` for every in-bounds tap.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let g = self;
        let plane = g.out_plane();
        for c in 0..g.channels {
            for ky in 0..g.kernel_h {
                for kx in 0..g.kernel_w {
                    let row = (c * g.kernel_h + ky) * g.kernel_w + kx;
                    for oy in 0..g.out_h {
                        let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                        if iy < 0 || iy >= g.height as isize {
                            continue;
                        }
                        let base = (c * g.height + iy as usize) * g.width;
                        for ox in 0..g.out_w {
                            let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                            if ix < 0 || ix >= g.width as isize {
                                continue;
                            }
                            f(row * plane, oy * g.out_w + ox, base + ix as usize);
                        }
                    }
                }
            }
        }
    }

    /// Patch matrix `[patch_len, out_h * out_w]`, zero where padding.
    pub fn im2col(&self, input: &[f64]) -> Vec<f64> {
        let mut cols = vec![0.0; self.patch_len() * self.out_plane()];
        self.for_each_tap(|r, p, i| cols[r + p] = input[i]);
        cols
    }

    /// Scatter-adds a patch-matrix gradient back onto the input layout.
    pub fn col2im_add(&self, cols: &[f64], grad_in: &mut [f64]) {
        self.for_each_tap(|r, p, i| grad_in[i] += cols[r + p]);
    }
}

/// Cross-correlation of `input[c,h,w]` with `kernels[o,c,kh,kw]`.
pub fn conv2d(input: &Tensor, kernels: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    let g = ConvGeometry::new(input.shape(), kernels.shape(), stride, padding)?;
    let cols = g.im2col(input.data());
    let mut out = vec![0.0; g.out_channels * g.out_plane()];
    matmul_into(kernels.data(), &cols, &mut out, g.out_channels, g.patch_len(), g.out_plane());
    Tensor::new(g.out_shape(), out)
}

pub(crate) fn conv2d_backward(
    g: &ConvGeometry,
    input: &[f64],
    kernels: &[f64],
    grad_out: &[f64],
    grad_in: Option<&mut [f64]>,
    grad_k: Option<&mut [f64]>,
) {
    let (o, ck, p) = (g.out_channels, g.patch_len(), g.out_plane());
    if let Some(gk) = grad_k {
        let cols = g.im2col(input);
        matmul_bt_into(grad_out, &cols, gk, o, p, ck);
    }
    if let Some(gi) = grad_in {
        let mut gcols = vec![0.0; ck * p];
        matmul_at_into(kernels, grad_out, &mut gcols, o, ck, p);
        g.col2im_add(&gcols, gi);
    }
}

/// `(outer, len, inner)` strides for reducing over `axis`.
pub(crate) fn axis_split(shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return shape_err(format!("axis {axis} out of range for shape {shape:?}"));
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, shape[axis], inner))
}

pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    if !x.is_finite() {
        return Err(Error::Numeric("softmax"));
    }
    let (outer, n, inner) = axis_split(x.shape(), axis)?;
    let src = x.data();
    let mut out = vec![0.0; src.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * n + j) * inner + i;
            let max = (0..n).map(|j| src[at(j)]).fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..n {
                let e = (src[at(j)] - max).exp();
                out[at(j)] = e;
                sum += e;
            }
            for j in 0..n {
                out[at(j)] /= sum;
            }
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

pub(crate) fn softmax_backward(y: &[f64], g: &[f64], dx: &mut [f64], outer: usize, n: usize, inner: usize) {
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * n + j) * inner + i;
            let dot: f64 = (0..n).map(|j| y[at(j)] * g[at(j)]).sum();
            for j in 0..n {
                dx[at(j)] += y[at(j)] * (g[at(j)] - dot);
            }
        }
    }
}

/// Layout of a batched multi-head attention call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttentionGeometry {
    pub batch: usize,
    pub q_len: usize,
    pub kv_len: usize,
    pub heads: usize,
    pub key_dim: usize,
    pub value_dim: usize,
}

impl AttentionGeometry {
    pub fn new(q: &[usize], k: &[usize], v: &[usize], batch: usize, heads: usize) -> Result<Self> {
        let dims = |s: &[usize], name: &str| match *s {
            [r, c] => Ok((r, c)),
            _ => shape_err(format!("attention {name} must be a matrix, got {s:?}")),
        };
        let (qr, qc) = dims(q, "Q")?;
        let (kr, kc) = dims(k, "K")?;
        let (vr, vc) = dims(v, "V")?;
        if kr != vr {
            return shape_err(format!("attention K length {kr} differs from V length {vr}"));
        }
        if qc != kc {
            return shape_err(format!("attention Q width {qc} differs from K width {kc}"));
        }
        if batch == 0 || heads == 0 || qr % batch != 0 || kr % batch != 0 {
            return shape_err(format!("attention rows {qr}/{kr} not divisible by batch {batch}"));
        }
        if qc % heads != 0 || vc % heads != 0 {
            return shape_err(format!("attention widths {qc}/{vc} not divisible by {heads} heads"));
        }
        Ok(Self {
            batch,
            q_len: qr / batch,
            kv_len: kr / batch,
            heads,
            key_dim: qc / heads,
            value_dim: vc / heads,
        })
    }

    fn width_q(&self) -> usize {
        self.heads * self.key_dim
    }

    fn width_v(&self) -> usize {
        self.heads * self.value_dim
    }

    fn weight_index(&self, b: usize, h: usize, i: usize, j: usize) -> usize {
        ((b * self.heads + h) * self.q_len + i) * self.kv_len + j
    }
}

/// Scaled dot-product attention, `softmax(QK^T / sqrt(d_k)) V` per head.
/// Keys with `key_mask[row] == false` receive zero weight; a query whose
/// keys are all masked produces a zero row. Returns `(output, weights)`.
pub fn attention(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    batch: usize,
    heads: usize,
    key_mask: Option<&[bool]>,
) -> Result<(Tensor, Vec<f64>)> {
    let g = AttentionGeometry::new(q.shape(), k.shape(), v.shape(), batch, heads)?;
    if let Some(m) = key_mask {
        if m.len() != batch * g.kv_len {
            return shape_err(format!("key mask length {} != {}", m.len(), batch * g.kv_len));
        }
    }
    let scale = 1.0 / (g.key_dim as f64).sqrt();
    let (qd, kd, vd) = (q.data(), k.data(), v.data());
    let (wq, wv) = (g.width_q(), g.width_v());
    let mut weights = vec![0.0; g.batch * g.heads * g.q_len * g.kv_len];
    let mut out = vec![0.0; g.batch * g.q_len * wv];
    let mut scores = vec![0.0; g.kv_len];
    for b in 0..g.batch {
        for h in 0..g.heads {
            for i in 0..g.q_len {
                let qrow = &qd[(b * g.q_len + i) * wq + h * g.key_dim..][..g.key_dim];
                let mut max = f64::NEG_INFINITY;
                for (j, s) in scores.iter_mut().enumerate() {
                    let row = b * g.kv_len + j;
                    if key_mask.is_some_and(|m| !m[row]) {
                        *s = f64::NEG_INFINITY;
                        continue;
                    }
                    let krow = &kd[row * wq + h * g.key_dim..][..g.key_dim];
                    *s = qrow.iter().zip(krow).map(|(a, c)| a * c).sum::<f64>() * scale;
                    max = max.max(*s);
                }
                if max == f64::NEG_INFINITY {
                    continue;
                }
                let sum: f64 = scores.iter().map(|s| (s - max).exp()).sum();
                let orow = &mut out[(b * g.q_len + i) * wv + h * g.value_dim..][..g.value_dim];
                for (j, s) in scores.iter().enumerate() {
                    let w = (s - max).exp() / sum;
                    weights[g.weight_index(b, h, i, j)] = w;
                    if w == 0.0 {
                        continue;
                    }
                    let vrow = &vd[(b * g.kv_len + j) * wv + h * g.value_dim..][..g.value_dim];
                    for (o, x) in orow.iter_mut().zip(vrow) {
                        *o += w * x;
                    }
                }
            }
        }
    }
    let out = Tensor::new(vec![g.batch * g.q_len, wv], out)?;
    Ok((out, weights))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn attention_backward(
    g: &AttentionGeometry,
    q: &[f64],
    k: &[f64],
    v: &[f64],
    weights: &[f64],
    grad_out: &[f64],
    dq: &mut [f64],
    dk: &mut [f64],
    dv: &mut [f64],
) {
    let scale = 1.0 / (g.key_dim as f64).sqrt();
    let (wq, wv) = (g.width_q(), g.width_v());
    let mut dw = vec![0.0; g.kv_len];
    for b in 0..g.batch {
        for h in 0..g.heads {
            for i in 0..g.q_len {
                let go = &grad_out[(b * g.q_len + i) * wv + h * g.value_dim..][..g.value_dim];
                let mut dot = 0.0;
                for j in 0..g.kv_len {
                    let w = weights[g.weight_index(b, h, i, j)];
                    let vbase = (b * g.kv_len + j) * wv + h * g.value_dim;
                    let vrow = &v[vbase..vbase + g.value_dim];
                    dw[j] = go.iter().zip(vrow).map(|(a, c)| a * c).sum();
                    dot += w * dw[j];
                    for (d, gv) in dv[vbase..vbase + g.value_dim].iter_mut().zip(go) {
                        *d += w * gv;
                    }
                }
                let qbase = (b * g.q_len + i) * wq + h * g.key_dim;
                for j in 0..g.kv_len {
                    let w = weights[g.weight_index(b, h, i, j)];
                    let ds = w * (dw[j] - dot) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    let kbase = (b * g.kv_len + j) * wq + h * g.key_dim;
                    for d in 0..g.key_dim {
                        dq[qbase + d] += ds * k[kbase + d];
                        dk[kbase + d] += ds * q[qbase + d];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_examples() {
        let eye = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let m = Tensor::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]);
        assert_eq!(matmul(&eye, &m).unwrap(), m);

        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let ones = Tensor::from_rows(&[vec![1.0], vec![1.0]]);
        assert_eq!(matmul(&a, &ones).unwrap().data(), &[3.0, 7.0]);

        let s = matmul(&Tensor::from_rows(&[vec![3.0]]), &Tensor::from_rows(&[vec![4.0]])).unwrap();
        assert_eq!(s.data(), &[12.0]);
    }

    #[test]
    fn matmul_mismatch_names_both_shapes() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        let msg = matmul(&a, &b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3] x [2, 3]"), "{msg}");
    }

    #[test]
    fn conv2d_examples() {
        let ones = Tensor::full(&[1, 3, 3], 1.0);
        let k = Tensor::full(&[1, 1, 1, 1], 2.0);
        let out = conv2d(&ones, &k, 1, 0).unwrap();
        assert_eq!(out.shape(), &[1, 3, 3]);
        assert!(out.data().iter().all(|&v| v == 2.0));

        let x = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let k = Tensor::full(&[1, 1, 2, 2], 1.0);
        assert_eq!(conv2d(&x, &k, 1, 0).unwrap().data(), &[10.0]);

        let z = Tensor::zeros(&[2, 5, 5]);
        let k = Tensor::new(vec![3, 2, 3, 3], (0..54).map(f64::from).collect()).unwrap();
        let out = conv2d(&z, &k, 2, 1).unwrap();
        assert_eq!(out.shape(), &[3, 3, 3]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv2d_kernel_too_large() {
        let x = Tensor::zeros(&[1, 2, 2]);
        let k = Tensor::zeros(&[1, 1, 3, 3]);
        assert!(matches!(conv2d(&x, &k, 1, 0), Err(Error::Shape(_))));
        assert!(conv2d(&x, &k, 1, 1).is_ok());
    }

    #[test]
    fn softmax_examples() {
        let s = softmax(&Tensor::row(vec![0.0, 0.0]), 1).unwrap();
        assert_eq!(s.data(), &[0.5, 0.5]);
        let s = softmax(&Tensor::row(vec![1f64.ln(), 3f64.ln()]), 1).unwrap();
        assert!((s.data()[0] - 0.25).abs() < 1e-15);
        assert!((s.data()[1] - 0.75).abs() < 1e-15);
        assert!(matches!(
            softmax(&Tensor::row(vec![f64::NAN, 0.0]), 1),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn softmax_handles_large_inputs() {
        let s = softmax(&Tensor::row(vec![1000.0, 1000.0]), 1).unwrap();
        assert_eq!(s.data(), &[0.5, 0.5]);
    }
}
