use rand::Rng;

use super::kernels::{self, gemm_nn, gemm_nt};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

/// Boundary handling for [`Graph::conv1d`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Zero,
    Circular,
}

#[derive(Debug)]
pub(crate) enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    Passthrough(Var),
    MatMul(Var, Var),
    BatchMatMul { a: Var, b: Var, trans_b: bool },
    Permute(Var, Vec<usize>),
    Softmax(Var),
    MaskAfter(Var, Vec<usize>),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Elu(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Conv1d { x: Var, kernel: Var, padding: Padding },
    MaxPool { x: Var, argmax: Vec<usize> },
    Dropout { x: Var, mask: Vec<f64> },
    Narrow { x: Var, axis: usize, start: usize },
    Concat { xs: Vec<Var>, axis: usize },
    GatherRows { x: Var, idx: Vec<Vec<usize>> },
    ScatterRows { base: Var, vals: Var, idx: Vec<Vec<usize>> },
    MeanFill { x: Var, causal: bool },
    Sum(Var),
    Mean(Var),
}

#[derive(Debug)]
pub(crate) struct Node {
    pub(crate) shape: Vec<usize>,
    pub(crate) data: Vec<f64>,
    pub(crate) op: Op,
    pub(crate) requires_grad: bool,
    pub(crate) grad: Option<Vec<f64>>,
}

/// Tape of one forward pass.
///
/// Nodes are appended in execution order, so every node's inputs precede it.
/// `op_count` tallies scalar multiply-accumulates done by matmul, conv and
/// explicitly recorded kernels.
#[derive(Debug, Default)]
pub struct Graph {
    pub(crate) nodes: Vec<Node>,
    op_counter: u64,
    pub(crate) consumed: bool,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn op_count(&self) -> u64 {
        self.op_counter
    }

    /// Adds work done outside the recorded ops (e.g. sampled score estimates).
    pub fn record_ops(&mut self, n: u64) {
        self.op_counter += n;
    }

    /// Records a leaf. Gradients are tracked when the tensor requires them.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let requires_grad = t.requires_grad;
        self.nodes.push(Node {
            shape: t.shape,
            data: t.data,
            op: Op::Leaf,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, shape: &[usize], data: Vec<f64>) -> Result<Var> {
        Ok(self.leaf(Tensor::new(shape.to_vec(), data)?))
    }

    pub fn zeros(&mut self, shape: &[usize]) -> Var {
        self.leaf(Tensor::zeros(shape))
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].data
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Copies a node out as a standalone tensor (with its gradient, if any).
    pub fn tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::from_parts(n.shape.clone(), n.data.clone(), n.grad.clone())
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            shape,
            data,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::dim(op, sa, sb));
        }
        Ok(())
    }

    fn zip_map(&mut self, op_name: &'static str, a: Var, b: Var, f: fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        self.same_shape(op_name, a, b)?;
        let data = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, data, op, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds `bias` (shape `[n]`) to every length-`n` row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let n = *self.shape(x).last().unwrap_or(&1);
        if self.shape(bias) != [n] {
            return Err(Error::dim("add_bias", self.shape(x), self.shape(bias)));
        }
        let b = self.value(bias);
        let data = self
            .value(x)
            .chunks(n)
            .flat_map(|row| row.iter().zip(b).map(|(x, b)| x + b))
            .collect();
        let shape = self.shape(x).to_vec();
        Ok(self.push(shape, data, Op::AddBias(x, bias), &[x, bias]))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let data = self.value(x).iter().map(|v| v * s).collect();
        let shape = self.shape(x).to_vec();
        self.push(shape, data, Op::Scale(x, s), &[x])
    }

    pub fn add_scalar(&mut self, x: Var, s: f64) -> Var {
        let data = self.value(x).iter().map(|v| v + s).collect();
        let shape = self.shape(x).to_vec();
        self.push(shape, data, Op::Passthrough(x), &[x])
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let numel: usize = shape.iter().product();
        if numel != self.value(x).len() || shape.contains(&0) {
            return Err(Error::dim("reshape", self.shape(x), shape));
        }
        let data = self.value(x).to_vec();
        Ok(self.push(shape.to_vec(), data, Op::Passthrough(x), &[x]))
    }

    /// `a[..., k] x b[k, n] -> [..., n]`; leading dimensions of `a` are
    /// flattened into rows.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.is_empty() || sb.len() != 2 || sa[sa.len() - 1] != sb[0] {
            return Err(Error::dim("matmul", sa, sb));
        }
        let k = sb[0];
        let n = sb[1];
        let m = self.value(a).len() / k;
        let mut out = vec![0.0; m * n];
        gemm_nn(m, k, n, self.value(a), self.value(b), &mut out);
        let mut shape = sa.to_vec();
        *shape.last_mut().unwrap() = n;
        self.op_counter += (m * k * n) as u64;
        Ok(self.push(shape, out, Op::MatMul(a, b), &[a, b]))
    }

    /// Batched product over the last two axes: `a[.., m, k] x b[.., k, n]`,
    /// or `a x b^T` with `b[.., n, k]` when `trans_b` is set.
    pub fn bmm(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let r = sa.len();
        if r < 2 || sb.len() != r || sa[..r - 2] != sb[..r - 2] {
            return Err(Error::dim("bmm", sa, sb));
        }
        let (m, k) = (sa[r - 2], sa[r - 1]);
        let (kb, n) = if trans_b {
            (sb[r - 1], sb[r - 2])
        } else {
            (sb[r - 2], sb[r - 1])
        };
        if k != kb {
            return Err(Error::dim("bmm", sa, sb));
        }
        let batch: usize = sa[..r - 2].iter().product();
        let mut out = vec![0.0; batch * m * n];
        let (av, bv) = (self.value(a), self.value(b));
        for g in 0..batch {
            let ab = &av[g * m * k..(g + 1) * m * k];
            let bb = &bv[g * k * n..(g + 1) * k * n];
            let ob = &mut out[g * m * n..(g + 1) * m * n];
            if trans_b {
                gemm_nt(m, k, n, ab, bb, ob);
            } else {
                gemm_nn(m, k, n, ab, bb, ob);
            }
        }
        let mut shape = sa[..r - 2].to_vec();
        shape.extend([m, n]);
        self.op_counter += (batch * m * k * n) as u64;
        Ok(self.push(shape, out, Op::BatchMatMul { a, b, trans_b }, &[a, b]))
    }

    pub fn permute(&mut self, x: Var, perm: &[usize]) -> Result<Var> {
        let shape = self.shape(x);
        let mut seen = vec![false; shape.len()];
        if perm.len() != shape.len() || perm.iter().any(|&p| p >= shape.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::dim("permute", shape, perm));
        }
        let (out_shape, data) = kernels::permute(self.value(x), shape, perm);
        Ok(self.push(out_shape, data, Op::Permute(x, perm.to_vec()), &[x]))
    }

    /// Softmax along the last axis, with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let Some(&n) = shape.last() else {
            return Err(Error::dim("softmax", &shape, &[]));
        };
        let mut data = self.value(x).to_vec();
        for row in data.chunks_mut(n) {
            softmax_row(row);
        }
        Ok(self.push(shape, data, Op::Softmax(x), &[x]))
    }

    /// Sets entries `j > positions[r]` of every last-axis row `r` to `-inf`.
    pub fn mask_after(&mut self, x: Var, positions: Vec<usize>) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let n = *shape.last().unwrap_or(&1);
        let rows = self.value(x).len() / n;
        if positions.len() != rows {
            return Err(Error::dim("mask_after", &shape, &[positions.len()]));
        }
        let mut data = self.value(x).to_vec();
        for (row, &p) in data.chunks_mut(n).zip(&positions) {
            for v in row.iter_mut().skip(p + 1) {
                *v = f64::NEG_INFINITY;
            }
        }
        Ok(self.push(shape, data, Op::MaskAfter(x, positions), &[x]))
    }

    /// Causal mask for scores shaped `[.., L_q, L_k]`: query `i` sees keys `0..=i`.
    pub fn causal_mask(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x);
        if shape.len() < 2 {
            return Err(Error::dim("causal_mask", shape, &[]));
        }
        let lq = shape[shape.len() - 2];
        let rows = self.value(x).len() / shape[shape.len() - 1];
        self.mask_after(x, (0..rows).map(|r| r % lq).collect())
    }

    fn unary(&mut self, x: Var, f: fn(f64) -> f64, op: Op) -> Var {
        let data = self.value(x).iter().map(|&v| f(v)).collect();
        let shape = self.shape(x).to_vec();
        self.push(shape, data, op, &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(0.0), Op::Relu(x))
    }

    /// ELU with `alpha = 1`.
    pub fn elu(&mut self, x: Var) -> Var {
        self.unary(x, |v| if v > 0.0 { v } else { v.exp_m1() }, Op::Elu(x))
    }

    /// Layer normalisation over the last axis with affine `gamma`, `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let n = *shape.last().unwrap_or(&1);
        if self.shape(gamma) != [n] || self.shape(beta) != [n] {
            return Err(Error::dim("layer_norm", &shape, self.shape(gamma)));
        }
        let (g, b) = (self.value(gamma), self.value(beta));
        let xs = self.value(x);
        let rows = xs.len() / n;
        let mut xhat = Vec::with_capacity(xs.len());
        let mut inv_std = Vec::with_capacity(rows);
        let mut out = Vec::with_capacity(xs.len());
        for row in xs.chunks(n) {
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for (j, v) in row.iter().enumerate() {
                let h = (v - mean) * is;
                xhat.push(h);
                out.push(g[j] * h + b[j]);
            }
        }
        let op = Op::LayerNorm {
            x,
            gamma,
            beta,
            xhat,
            inv_std,
        };
        Ok(self.push(shape, out, op, &[x, gamma, beta]))
    }

    /// Length-preserving 1-D convolution of `x[B, L, C_in]` with
    /// `kernel[W, C_in, C_out]`; `W` must be odd.
    pub fn conv1d(&mut self, x: Var, kernel: Var, padding: Padding) -> Result<Var> {
        let (sx, sk) = (self.shape(x), self.shape(kernel));
        if sx.len() != 3 || sk.len() != 3 || sx[2] != sk[1] {
            return Err(Error::dim("conv1d", sx, sk));
        }
        let (batch, len, c_in) = (sx[0], sx[1], sx[2]);
        let (width, c_out) = (sk[0], sk[2]);
        if width % 2 == 0 {
            return Err(Error::Config(format!("conv1d kernel width must be odd, got {width}")));
        }
        let mut out = vec![0.0; batch * len * c_out];
        let xv = self.value(x);
        let kv = self.value(kernel);
        let mut shifted = vec![0.0; batch * len * c_in];
        for w in 0..width {
            conv_shift(xv, &mut shifted, batch, len, c_in, w, width, padding);
            let kw = &kv[w * c_in * c_out..(w + 1) * c_in * c_out];
            gemm_nn(batch * len, c_in, c_out, &shifted, kw, &mut out);
        }
        self.op_counter += (batch * len * width * c_in * c_out) as u64;
        Ok(self.push(
            vec![batch, len, c_out],
            out,
            Op::Conv1d { x, kernel, padding },
            &[x, kernel],
        ))
    }

    /// Max pooling over axis 1 of `x[B, L, C]`, width 3, stride 2, padding 1.
    /// Output length is `ceil(L / 2)`.
    pub fn max_pool(&mut self, x: Var) -> Result<Var> {
        let sx = self.shape(x);
        if sx.len() != 3 {
            return Err(Error::dim("max_pool", sx, &[]));
        }
        let (batch, len, ch) = (sx[0], sx[1], sx[2]);
        let out_len = (len - 1) / 2 + 1;
        let xv = self.value(x);
        let mut out = Vec::with_capacity(batch * out_len * ch);
        let mut argmax = Vec::with_capacity(batch * out_len * ch);
        for b in 0..batch {
            for o in 0..out_len {
                let lo = (2 * o).saturating_sub(1);
                let hi = (2 * o + 1).min(len - 1);
                for c in 0..ch {
                    let mut best = (b * len + lo) * ch + c;
                    for l in lo + 1..=hi {
                        let idx = (b * len + l) * ch + c;
                        if xv[idx] > xv[best] {
                            best = idx;
                        }
                    }
                    out.push(xv[best]);
                    argmax.push(best);
                }
            }
        }
        Ok(self.push(vec![batch, out_len, ch], out, Op::MaxPool { x, argmax }, &[x]))
    }

    /// Inverted dropout: survivors are scaled by `1 / (1 - p)`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout rate must be in [0, 1), got {p}")));
        }
        if p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..self.value(x).len())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let data = self.value(x).iter().zip(&mask).map(|(v, m)| v * m).collect();
        let shape = self.shape(x).to_vec();
        Ok(self.push(shape, data, Op::Dropout { x, mask }, &[x]))
    }

    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::dim("narrow", &shape, &[axis, start, len]));
        }
        let (outer, dim, inner) = kernels::split_axis(&shape, axis);
        let xv = self.value(x);
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * dim + start) * inner;
            data.extend_from_slice(&xv[base..base + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        Ok(self.push(out_shape, data, Op::Narrow { x, axis, start }, &[x]))
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let first = xs
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let base_shape = self.shape(*first).to_vec();
        if axis >= base_shape.len() {
            return Err(Error::dim("concat", &base_shape, &[axis]));
        }
        let mut total = 0;
        for &v in xs {
            let s = self.shape(v);
            let compatible = s.len() == base_shape.len()
                && s.iter()
                    .zip(&base_shape)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::dim("concat", &base_shape, s));
            }
            total += s[axis];
        }
        let (outer, _, inner) = kernels::split_axis(&base_shape, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in xs {
                let d = self.shape(v)[axis];
                data.extend_from_slice(&self.value(v)[o * d * inner..(o + 1) * d * inner]);
            }
        }
        let mut shape = base_shape;
        shape[axis] = total;
        Ok(self.push(shape, data, Op::Concat { xs: xs.to_vec(), axis }, xs))
    }

    /// Selects rows along axis `-2` independently for every leading group:
    /// `x[.., L, d] -> [.., u, d]` with `idx[g]` of length `u`.
    pub fn gather_rows(&mut self, x: Var, idx: Vec<Vec<usize>>) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let (groups, len, d) = rows_layout(&shape)?;
        let u = idx.first().map_or(0, Vec::len);
        if idx.len() != groups || u == 0 || idx.iter().any(|r| r.len() != u || r.iter().any(|&i| i >= len)) {
            return Err(Error::dim("gather_rows", &shape, &[idx.len(), u]));
        }
        let xv = self.value(x);
        let mut data = Vec::with_capacity(groups * u * d);
        for (g, rows) in idx.iter().enumerate() {
            for &r in rows {
                let s = (g * len + r) * d;
                data.extend_from_slice(&xv[s..s + d]);
            }
        }
        let mut out_shape = shape;
        let r = out_shape.len();
        out_shape[r - 2] = u;
        Ok(self.push(out_shape, data, Op::GatherRows { x, idx }, &[x]))
    }

    /// Inverse of [`Graph::gather_rows`]: copies `base` and overwrites the
    /// rows named by `idx` with `vals`. Row indices must be distinct per group.
    pub fn scatter_rows(&mut self, base: Var, vals: Var, idx: Vec<Vec<usize>>) -> Result<Var> {
        let shape = self.shape(base).to_vec();
        let vshape = self.shape(vals).to_vec();
        let (groups, len, d) = rows_layout(&shape)?;
        let (vgroups, u, vd) = rows_layout(&vshape)?;
        if vgroups != groups || vd != d || idx.len() != groups || idx.iter().any(|r| r.len() != u) {
            return Err(Error::dim("scatter_rows", &shape, &vshape));
        }
        for rows in &idx {
            let mut seen = vec![false; len];
            for &r in rows {
                if r >= len || std::mem::replace(&mut seen[r], true) {
                    return Err(Error::Contract(format!("scatter_rows: invalid or repeated row {r}")));
                }
            }
        }
        let mut data = self.value(base).to_vec();
        let vv = self.value(vals);
        for (g, rows) in idx.iter().enumerate() {
            for (j, &r) in rows.iter().enumerate() {
                let dst = (g * len + r) * d;
                let src = (g * u + j) * d;
                data[dst..dst + d].copy_from_slice(&vv[src..src + d]);
            }
        }
        Ok(self.push(shape, data, Op::ScatterRows { base, vals, idx }, &[base, vals]))
    }

    /// Replaces every row along axis `-2` with the mean of all rows
    /// (`causal = false`) or of rows `0..=i` (`causal = true`).
    pub fn mean_fill(&mut self, x: Var, causal: bool) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let (groups, len, d) = rows_layout(&shape)?;
        let xv = self.value(x);
        let mut data = vec![0.0; xv.len()];
        for g in 0..groups {
            let block = &xv[g * len * d..(g + 1) * len * d];
            let out = &mut data[g * len * d..(g + 1) * len * d];
            let mut acc = vec![0.0; d];
            for (i, row) in block.chunks(d).enumerate() {
                acc.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                if causal {
                    let inv = 1.0 / (i + 1) as f64;
                    out[i * d..(i + 1) * d]
                        .iter_mut()
                        .zip(&acc)
                        .for_each(|(o, a)| *o = a * inv);
                }
            }
            if !causal {
                let inv = 1.0 / len as f64;
                for row in out.chunks_mut(d) {
                    row.iter_mut().zip(&acc).for_each(|(o, a)| *o = a * inv);
                }
            }
        }
        Ok(self.push(shape, data, Op::MeanFill { x, causal }, &[x]))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        self.push(Vec::new(), vec![s], Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.iter().sum::<f64>() / v.len() as f64;
        self.push(Vec::new(), vec![s], Op::Mean(x), &[x])
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn softmax_row(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        // fully masked row: no admissible key, emit zeros
        row.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

/// `(groups, rows, row_width)` for a tensor of rank >= 2.
pub(crate) fn rows_layout(shape: &[usize]) -> Result<(usize, usize, usize)> {
    let r = shape.len();
    if r < 2 {
        return Err(Error::dim("rows_layout", shape, &[]));
    }
    Ok((shape[..r - 2].iter().product(), shape[r - 2], shape[r - 1]))
}

/// Fills `shifted[b, l, :]` with `x[b, l + w - W/2, :]` under `padding`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_shift(
    x: &[f64],
    shifted: &mut [f64],
    batch: usize,
    len: usize,
    c_in: usize,
    w: usize,
    width: usize,
    padding: Padding,
) {
    let offset = w as isize - (width / 2) as isize;
    for b in 0..batch {
        for l in 0..len {
            let dst = &mut shifted[(b * len + l) * c_in..(b * len + l + 1) * c_in];
            match source_index(l, offset, len, padding) {
                Some(src) => dst.copy_from_slice(&x[(b * len + src) * c_in..(b * len + src + 1) * c_in]),
                None => dst.iter_mut().for_each(|v| *v = 0.0),
            }
        }
    }
}

pub(crate) fn source_index(l: usize, offset: isize, len: usize, padding: Padding) -> Option<usize> {
    let s = l as isize + offset;
    match padding {
        Padding::Circular => Some(s.rem_euclid(len as isize) as usize),
        Padding::Zero => (0..len as isize).contains(&s).then_some(s as usize),
    }
}
