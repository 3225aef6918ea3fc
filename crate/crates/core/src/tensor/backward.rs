use super::graph::{conv_shift, rows_layout, source_index, Graph, Node, Op, Var};
use super::kernels::{self, gemm_nn, gemm_nt, gemm_tn};
use crate::error::{Error, Result};

impl Graph {
    /// Reverse pass from a scalar `loss`. Leaves keep their gradients; the
    /// graph is consumed and rejects a second call.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.consumed {
            return Err(Error::Contract("graph already consumed by a backward pass".into()));
        }
        let node = self
            .nodes
            .get(loss.0)
            .ok_or_else(|| Error::Contract("loss does not belong to this graph".into()))?;
        if node.data.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                node.shape
            )));
        }
        if !node.requires_grad {
            return Err(Error::Contract(
                "loss is detached: no gradient-tracking leaf reaches it".into(),
            ));
        }
        self.consumed = true;
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.nodes[loss.0].grad = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &mut rest[0];
            if matches!(node.op, Op::Leaf) || node.grad.is_none() {
                continue;
            }
            let g = node.grad.take().unwrap();
            let contributions = input_grads(node, &g, before);
            for (v, delta) in contributions {
                let target = &mut before[v.0];
                match &mut target.grad {
                    Some(acc) => acc.iter_mut().zip(&delta).for_each(|(a, d)| *a += d),
                    None => target.grad = Some(delta),
                }
            }
        }
        Ok(())
    }
}

fn input_grads(node: &Node, g: &[f64], nodes: &[Node]) -> Vec<(Var, Vec<f64>)> {
    let mut out = Vec::with_capacity(2);
    let wants = |v: Var| nodes[v.0].requires_grad;
    let val = |v: Var| nodes[v.0].data.as_slice();
    let shape = |v: Var| nodes[v.0].shape.as_slice();

    match &node.op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            if wants(*a) {
                out.push((*a, g.to_vec()));
            }
            if wants(*b) {
                out.push((*b, g.to_vec()));
            }
        }
        Op::Sub(a, b) => {
            if wants(*a) {
                out.push((*a, g.to_vec()));
            }
            if wants(*b) {
                out.push((*b, g.iter().map(|v| -v).collect()));
            }
        }
        Op::Mul(a, b) => {
            if wants(*a) {
                out.push((*a, g.iter().zip(val(*b)).map(|(g, y)| g * y).collect()));
            }
            if wants(*b) {
                out.push((*b, g.iter().zip(val(*a)).map(|(g, x)| g * x).collect()));
            }
        }
        Op::AddBias(x, bias) => {
            if wants(*x) {
                out.push((*x, g.to_vec()));
            }
            if wants(*bias) {
                let n = val(*bias).len();
                let mut db = vec![0.0; n];
                for row in g.chunks(n) {
                    db.iter_mut().zip(row).for_each(|(d, v)| *d += v);
                }
                out.push((*bias, db));
            }
        }
        Op::Scale(x, s) => {
            if wants(*x) {
                out.push((*x, g.iter().map(|v| v * s).collect()));
            }
        }
        Op::Passthrough(x) => {
            if wants(*x) {
                out.push((*x, g.to_vec()));
            }
        }
        Op::MatMul(a, b) => {
            let sb = shape(*b);
            let (k, n) = (sb[0], sb[1]);
            let m = val(*a).len() / k;
            if wants(*a) {
                let mut da = vec![0.0; m * k];
                gemm_nt(m, n, k, g, val(*b), &mut da);
                out.push((*a, da));
            }
            if wants(*b) {
                let mut db = vec![0.0; k * n];
                gemm_tn(m, k, n, val(*a), g, &mut db);
                out.push((*b, db));
            }
        }
        Op::BatchMatMul { a, b, trans_b } => {
            let sa = shape(*a);
            let r = sa.len();
            let (m, k) = (sa[r - 2], sa[r - 1]);
            let n = node.shape[r - 1];
            let batch: usize = sa[..r - 2].iter().product();
            let (av, bv) = (val(*a), val(*b));
            if wants(*a) {
                let mut da = vec![0.0; av.len()];
                for t in 0..batch {
                    let gb = &g[t * m * n..(t + 1) * m * n];
                    let bb = &bv[t * k * n..(t + 1) * k * n];
                    let db = &mut da[t * m * k..(t + 1) * m * k];
                    if *trans_b {
                        gemm_nn(m, n, k, gb, bb, db);
                    } else {
                        gemm_nt(m, n, k, gb, bb, db);
                    }
                }
                out.push((*a, da));
            }
            if wants(*b) {
                let mut dbv = vec![0.0; bv.len()];
                for t in 0..batch {
                    let gb = &g[t * m * n..(t + 1) * m * n];
                    let ab = &av[t * m * k..(t + 1) * m * k];
                    let db = &mut dbv[t * k * n..(t + 1) * k * n];
                    if *trans_b {
                        gemm_tn(m, n, k, gb, ab, db);
                    } else {
                        gemm_tn(m, k, n, ab, gb, db);
                    }
                }
                out.push((*b, dbv));
            }
        }
        Op::Permute(x, perm) => {
            if wants(*x) {
                let inv = kernels::inverse_perm(perm);
                let (_, dx) = kernels::permute(g, &node.shape, &inv);
                out.push((*x, dx));
            }
        }
        Op::Softmax(x) => {
            if wants(*x) {
                let n = *node.shape.last().unwrap();
                let mut dx = vec![0.0; g.len()];
                for ((dr, yr), gr) in dx.chunks_mut(n).zip(node.data.chunks(n)).zip(g.chunks(n)) {
                    let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                    for ((d, y), gv) in dr.iter_mut().zip(yr).zip(gr) {
                        *d = y * (gv - dot);
                    }
                }
                out.push((*x, dx));
            }
        }
        Op::MaskAfter(x, positions) => {
            if wants(*x) {
                let n = *node.shape.last().unwrap();
                let mut dx = g.to_vec();
                for (row, &p) in dx.chunks_mut(n).zip(positions) {
                    row.iter_mut().skip(p + 1).for_each(|v| *v = 0.0);
                }
                out.push((*x, dx));
            }
        }
        Op::Sigmoid(x) => {
            if wants(*x) {
                out.push((*x, g.iter().zip(&node.data).map(|(g, y)| g * y * (1.0 - y)).collect()));
            }
        }
        Op::Tanh(x) => {
            if wants(*x) {
                out.push((*x, g.iter().zip(&node.data).map(|(g, y)| g * (1.0 - y * y)).collect()));
            }
        }
        Op::Relu(x) => {
            if wants(*x) {
                out.push((*x, g.iter().zip(val(*x)).map(|(g, v)| if *v > 0.0 { *g } else { 0.0 }).collect()));
            }
        }
        Op::Elu(x) => {
            if wants(*x) {
                out.push((*x, g.iter().zip(val(*x)).map(|(g, v)| if *v > 0.0 { *g } else { g * v.exp() }).collect()));
            }
        }
        Op::LayerNorm {
            x,
            gamma,
            beta,
            xhat,
            inv_std,
        } => {
            let n = *node.shape.last().unwrap();
            let gam = val(*gamma);
            if wants(*x) {
                let mut dx = vec![0.0; g.len()];
                for (r, ((dr, hr), gr)) in dx.chunks_mut(n).zip(xhat.chunks(n)).zip(g.chunks(n)).enumerate() {
                    let mut sum_dh = 0.0;
                    let mut sum_dh_h = 0.0;
                    for j in 0..n {
                        let dh = gr[j] * gam[j];
                        sum_dh += dh;
                        sum_dh_h += dh * hr[j];
                    }
                    let (mean_dh, mean_dh_h) = (sum_dh / n as f64, sum_dh_h / n as f64);
                    for j in 0..n {
                        dr[j] = inv_std[r] * (gr[j] * gam[j] - mean_dh - hr[j] * mean_dh_h);
                    }
                }
                out.push((*x, dx));
            }
            if wants(*gamma) {
                let mut dg = vec![0.0; n];
                for (hr, gr) in xhat.chunks(n).zip(g.chunks(n)) {
                    for j in 0..n {
                        dg[j] += gr[j] * hr[j];
                    }
                }
                out.push((*gamma, dg));
            }
            if wants(*beta) {
                let mut db = vec![0.0; n];
                for gr in g.chunks(n) {
                    db.iter_mut().zip(gr).for_each(|(d, v)| *d += v);
                }
                out.push((*beta, db));
            }
        }
        Op::Conv1d { x, kernel, padding } => {
            let sx = shape(*x);
            let (batch, len, c_in) = (sx[0], sx[1], sx[2]);
            let sk = shape(*kernel);
            let (width, c_out) = (sk[0], sk[2]);
            let (xv, kv) = (val(*x), val(*kernel));
            let mut dx = wants(*x).then(|| vec![0.0; xv.len()]);
            let mut dk = wants(*kernel).then(|| vec![0.0; kv.len()]);
            let mut shifted = vec![0.0; batch * len * c_in];
            let mut dshift = vec![0.0; batch * len * c_in];
            for w in 0..width {
                let kw = &kv[w * c_in * c_out..(w + 1) * c_in * c_out];
                if let Some(dk) = dk.as_mut() {
                    conv_shift(xv, &mut shifted, batch, len, c_in, w, width, *padding);
                    gemm_tn(batch * len, c_in, c_out, &shifted, g, &mut dk[w * c_in * c_out..(w + 1) * c_in * c_out]);
                }
                if let Some(dx) = dx.as_mut() {
                    dshift.iter_mut().for_each(|v| *v = 0.0);
                    gemm_nt(batch * len, c_out, c_in, g, kw, &mut dshift);
                    let offset = w as isize - (width / 2) as isize;
                    for b in 0..batch {
                        for l in 0..len {
                            if let Some(src) = source_index(l, offset, len, *padding) {
                                let s = &dshift[(b * len + l) * c_in..(b * len + l + 1) * c_in];
                                let d = &mut dx[(b * len + src) * c_in..(b * len + src + 1) * c_in];
                                d.iter_mut().zip(s).for_each(|(a, v)| *a += v);
                            }
                        }
                    }
                }
            }
            if let Some(dx) = dx {
                out.push((*x, dx));
            }
            if let Some(dk) = dk {
                out.push((*kernel, dk));
            }
        }
        Op::MaxPool { x, argmax } => {
            if wants(*x) {
                let mut dx = vec![0.0; val(*x).len()];
                for (gv, &i) in g.iter().zip(argmax) {
                    dx[i] += gv;
                }
                out.push((*x, dx));
            }
        }
        Op::Dropout { x, mask } => {
            if wants(*x) {
                out.push((*x, g.iter().zip(mask).map(|(g, m)| g * m).collect()));
            }
        }
        Op::Narrow { x, axis, start } => {
            if wants(*x) {
                let sx = shape(*x);
                let (outer, dim, inner) = kernels::split_axis(sx, *axis);
                let len = node.shape[*axis];
                let mut dx = vec![0.0; val(*x).len()];
                for o in 0..outer {
                    let base = (o * dim + start) * inner;
                    dx[base..base + len * inner].copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                out.push((*x, dx));
            }
        }
        Op::Concat { xs, axis } => {
            let (outer, total, inner) = kernels::split_axis(&node.shape, *axis);
            let mut offset = 0;
            for &v in xs {
                let d = shape(v)[*axis];
                if wants(v) {
                    let mut dv = Vec::with_capacity(outer * d * inner);
                    for o in 0..outer {
                        let s = (o * total + offset) * inner;
                        dv.extend_from_slice(&g[s..s + d * inner]);
                    }
                    out.push((v, dv));
                }
                offset += d;
            }
        }
        Op::GatherRows { x, idx } => {
            if wants(*x) {
                let (_, len, d) = rows_layout(shape(*x)).expect("validated in forward");
                let u = idx[0].len();
                let mut dx = vec![0.0; val(*x).len()];
                for (grp, rows) in idx.iter().enumerate() {
                    for (j, &r) in rows.iter().enumerate() {
                        let dst = (grp * len + r) * d;
                        let src = (grp * u + j) * d;
                        dx[dst..dst + d].iter_mut().zip(&g[src..src + d]).for_each(|(a, v)| *a += v);
                    }
                }
                out.push((*x, dx));
            }
        }
        Op::ScatterRows { base, vals, idx } => {
            let (_, len, d) = rows_layout(&node.shape).expect("validated in forward");
            let u = idx[0].len();
            if wants(*base) {
                let mut db = g.to_vec();
                for (grp, rows) in idx.iter().enumerate() {
                    for &r in rows {
                        let s = (grp * len + r) * d;
                        db[s..s + d].iter_mut().for_each(|v| *v = 0.0);
                    }
                }
                out.push((*base, db));
            }
            if wants(*vals) {
                let mut dv = Vec::with_capacity(idx.len() * u * d);
                for (grp, rows) in idx.iter().enumerate() {
                    for &r in rows {
                        let s = (grp * len + r) * d;
                        dv.extend_from_slice(&g[s..s + d]);
                    }
                }
                out.push((*vals, dv));
            }
        }
        Op::MeanFill { x, causal } => {
            if wants(*x) {
                let (groups, len, d) = rows_layout(&node.shape).expect("validated in forward");
                let mut dx = vec![0.0; g.len()];
                for grp in 0..groups {
                    let gb = &g[grp * len * d..(grp + 1) * len * d];
                    let db = &mut dx[grp * len * d..(grp + 1) * len * d];
                    if *causal {
                        // row i receives sum_{l >= i} g[l] / (l + 1)
                        let mut acc = vec![0.0; d];
                        for i in (0..len).rev() {
                            let inv = 1.0 / (i + 1) as f64;
                            acc.iter_mut().zip(&gb[i * d..(i + 1) * d]).for_each(|(a, v)| *a += v * inv);
                            db[i * d..(i + 1) * d].copy_from_slice(&acc);
                        }
                    } else {
                        let mut acc = vec![0.0; d];
                        for row in gb.chunks(d) {
                            acc.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                        }
                        let inv = 1.0 / len as f64;
                        for row in db.chunks_mut(d) {
                            row.iter_mut().zip(&acc).for_each(|(o, a)| *o = a * inv);
                        }
                    }
                }
                out.push((*x, dx));
            }
        }
        Op::Sum(x) => {
            if wants(*x) {
                out.push((*x, vec![g[0]; val(*x).len()]));
            }
        }
        Op::Mean(x) => {
            if wants(*x) {
                let n = val(*x).len();
                out.push((*x, vec![g[0] / n as f64; n]));
            }
        }
    }
    out
}
