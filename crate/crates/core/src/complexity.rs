//! Operation counts and wall time of full versus ProbSparse self-attention.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::informer::{full_attention, probsparse_attention, Sampling};
use crate::tensor::{Graph, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionBenchRow {
    pub len: usize,
    /// Multiply-accumulates of `Q K^T` and the weighted sum over `V`.
    pub full_ops: u64,
    /// Sparsity sampling, top-`u` scores and their weighted sum.
    pub probsparse_ops: u64,
    pub full_ms: f64,
    pub probsparse_ms: f64,
}

/// Runs both attention forms once per length on random `[1, heads, L, d/heads]`
/// inputs and records the graph operation counters.
pub fn attention_bench(
    lengths: &[usize],
    d_model: usize,
    heads: usize,
    sampling_factor: usize,
    seed: u64,
) -> Result<Vec<AttentionBenchRow>> {
    if heads == 0 || d_model % heads != 0 {
        return Err(Error::Config(format!("d_model {d_model} is not divisible by {heads} heads")));
    }
    if lengths.contains(&0) {
        return Err(Error::Config("sequence lengths must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d_head = d_model / heads;
    lengths
        .iter()
        .map(|&len| {
            let shape = vec![1, heads, len, d_head];
            let mut input = || {
                let data = (0..heads * len * d_head).map(|_| rng.random_range(-1.0..1.0)).collect();
                Tensor::new(shape.clone(), data)
            };
            let (q, k, v) = (input()?, input()?, input()?);

            let mut g = Graph::new();
            let (qv, kv, vv) = (g.leaf(q.clone()), g.leaf(k.clone()), g.leaf(v.clone()));
            let start = Instant::now();
            full_attention(&mut g, qv, kv, vv, false)?;
            let full_ms = start.elapsed().as_secs_f64() * 1e3;
            let full_ops = g.op_count();

            let mut g = Graph::new();
            let (qv, kv, vv) = (g.leaf(q), g.leaf(k), g.leaf(v));
            let mut sample_rng = ChaCha8Rng::seed_from_u64(seed ^ len as u64);
            let start = Instant::now();
            probsparse_attention(&mut g, qv, kv, vv, sampling_factor, false, Sampling::Random(&mut sample_rng))?;
            let probsparse_ms = start.elapsed().as_secs_f64() * 1e3;
            Ok(AttentionBenchRow {
                len,
                full_ops,
                probsparse_ops: g.op_count(),
                full_ms,
                probsparse_ms,
            })
        })
        .collect()
}

/// `L,full_ops,probsparse_ops,full_ms,probsparse_ms` with a header row.
pub fn bench_csv(rows: &[AttentionBenchRow]) -> String {
    let mut out = String::from("L,full_ops,probsparse_ops,full_ms,probsparse_ms\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.3},{:.3}\n",
            r.len, r.full_ops, r.probsparse_ops, r.full_ms, r.probsparse_ms
        ));
    }
    out
}
