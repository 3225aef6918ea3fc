//! Scaled dot-product attention: the dense form and the ProbSparse variant
//! that only evaluates the top-`u` queries ranked by the sparsity measure.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::kernels::dot;
use crate::tensor::{Graph, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    ProbSparse,
    Full,
}

/// How the sparsity measure is estimated.
pub enum Sampling<'r, R: Rng + ?Sized> {
    /// Scores every query against every key.
    Exact,
    /// Scores every query against `c * ceil(ln L_K)` keys drawn with replacement.
    Random(&'r mut R),
}

/// `softmax(Q K^T / sqrt(d)) V` over `[.., L, d_head]` tensors. With `causal`,
/// query `i` only sees keys `0..=i`.
pub fn full_attention(g: &mut Graph, q: Var, k: Var, v: Var, causal: bool) -> Result<Var> {
    let d = *g.shape(q).last().ok_or_else(|| Error::dim("full_attention", &[], &[]))?;
    let scores = g.bmm(q, k, true)?;
    let scores = g.scale(scores, 1.0 / (d as f64).sqrt());
    let scores = if causal { g.causal_mask(scores)? } else { scores };
    let probs = g.softmax(scores)?;
    g.bmm(probs, v, false)
}

/// `max_i(q.k_i / sqrt(d)) - mean_i(q.k_i / sqrt(d))` over the rows of `keys`.
pub fn sparsity_measure(q: &[f64], keys: &[f64]) -> f64 {
    let d = q.len();
    let scale = 1.0 / (d as f64).sqrt();
    let (max, sum, n) = keys
        .chunks(d)
        .map(|k| dot(q, k) * scale)
        .fold((f64::NEG_INFINITY, 0.0, 0usize), |(m, s, n), x| (m.max(x), s + x, n + 1));
    (max - sum / n as f64).max(0.0)
}

/// Number of active queries `u = min(L, c * ceil(ln L))`, at least one.
pub fn active_queries(len: usize, factor: usize) -> usize {
    let log = (len as f64).ln().ceil() as usize;
    (factor * log).clamp(1, len)
}

/// ProbSparse attention over `[.., L, d_head]` inputs with `L_Q == L_K` when
/// causal. The `u` queries with the largest sparsity measure get exact
/// attention rows; every other query receives the mean of `V` (or the
/// running mean up to its position when causal). Ties go to the lower index.
/// When causal, query `i` is ranked on keys `0..=i` only.
pub fn probsparse_attention<R: Rng + ?Sized>(
    g: &mut Graph,
    q: Var,
    k: Var,
    v: Var,
    factor: usize,
    causal: bool,
    sampling: Sampling<'_, R>,
) -> Result<Var> {
    let qs = g.shape(q).to_vec();
    let ks = g.shape(k).to_vec();
    let vs = g.shape(v);
    let r = qs.len();
    if r < 2
        || ks.len() != r
        || vs.len() != r
        || qs[..r - 2] != ks[..r - 2]
        || qs[r - 1] != ks[r - 1]
        || vs[..r - 1] != ks[..r - 1]
    {
        return Err(Error::dim("probsparse_attention", &qs, &ks));
    }
    let (lq, lk, d) = (qs[r - 2], ks[r - 2], qs[r - 1]);
    if causal && lq != lk {
        return Err(Error::dim("probsparse_attention (causal)", &qs, &ks));
    }
    let groups: usize = qs[..r - 2].iter().product();
    let u = active_queries(lq, factor);
    let n_sample = active_queries(lk, factor);

    let (qv, kv) = (g.value(q).to_vec(), g.value(k));
    let mut selected = Vec::with_capacity(groups);
    let mut sampled_ops = 0u64;
    let mut sampling = sampling;
    let mut sample_buf = vec![0.0; n_sample * d];
    for grp in 0..groups {
        let keys = &kv[grp * lk * d..(grp + 1) * lk * d];
        let mut scored: Vec<(f64, usize)> = (0..lq)
            .map(|i| {
                let query = &qv[(grp * lq + i) * d..(grp * lq + i + 1) * d];
                // a causal query is ranked only on the keys it may attend to
                let visible = if causal { i + 1 } else { lk };
                let m = match &mut sampling {
                    Sampling::Exact => {
                        sampled_ops += (visible * d) as u64;
                        sparsity_measure(query, &keys[..visible * d])
                    }
                    Sampling::Random(rng) => {
                        for row in sample_buf.chunks_mut(d) {
                            let j = rng.random_range(0..visible);
                            row.copy_from_slice(&keys[j * d..(j + 1) * d]);
                        }
                        sampled_ops += (n_sample * d) as u64;
                        sparsity_measure(query, &sample_buf)
                    }
                };
                (m, i)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        selected.push(scored[..u].iter().map(|&(_, i)| i).collect::<Vec<usize>>());
    }
    g.record_ops(sampled_ops);

    let q_top = g.gather_rows(q, selected.clone())?;
    let scores = g.bmm(q_top, k, true)?;
    let scores = g.scale(scores, 1.0 / (d as f64).sqrt());
    let scores = if causal {
        let positions = selected.iter().flatten().copied().collect();
        g.mask_after(scores, positions)?
    } else {
        scores
    };
    let probs = g.softmax(scores)?;
    let context = g.bmm(probs, v, false)?;
    let base = if lq == lk {
        g.mean_fill(v, causal)?
    } else {
        // cross-shaped, non-causal: every row is the mean of V, broadcast to L_Q rows
        let mean = g.mean_fill(v, false)?;
        let first = g.narrow(mean, r - 2, 0, 1)?;
        let copies = vec![first; lq];
        g.concat(&copies, r - 2)?
    };
    g.scatter_rows(base, context, selected)
}
