use rand::Rng;

use super::attention::{full_attention, probsparse_attention, AttentionKind, Sampling};
use crate::error::{Error, Result};
use crate::tensor::{Padding, ParamId, ParamStore, Session, Var};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Affine map `x W + b` over the last axis. Initialised `U(-1/sqrt(in), 1/sqrt(in))`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (d_in as f64).sqrt();
        Linear {
            w: store.uniform(format!("{name}.w"), &[d_in, d_out], bound, rng),
            b: store.uniform(format!("{name}.b"), &[d_out], bound, rng),
        }
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let w = s.param(self.w);
        let b = s.param(self.b);
        let y = s.graph.matmul(x, w)?;
        s.graph.add_bias(y, b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, d: usize) -> Self {
        LayerNorm {
            gamma: store.constant(format!("{name}.gamma"), &[d], 1.0),
            beta: store.constant(format!("{name}.beta"), &[d], 0.0),
        }
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let gamma = s.param(self.gamma);
        let beta = s.param(self.beta);
        s.graph.layer_norm(x, gamma, beta, LAYER_NORM_EPS)
    }
}

/// Settings shared by every attention block of one model.
#[derive(Debug, Clone, Copy)]
pub struct AttentionSettings {
    pub n_heads: usize,
    pub sampling_factor: usize,
    pub exact_sparsity: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
}

impl MultiHeadAttention {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, d_model: usize, rng: &mut R) -> Self {
        MultiHeadAttention {
            q: Linear::new(store, &format!("{name}.q"), d_model, d_model, rng),
            k: Linear::new(store, &format!("{name}.k"), d_model, d_model, rng),
            v: Linear::new(store, &format!("{name}.v"), d_model, d_model, rng),
            o: Linear::new(store, &format!("{name}.o"), d_model, d_model, rng),
        }
    }

    /// `queries[B, L_q, d]` attending over `memory[B, L_k, d]`.
    pub fn forward(
        &self,
        s: &mut Session,
        queries: Var,
        memory: Var,
        kind: AttentionKind,
        causal: bool,
        cfg: AttentionSettings,
    ) -> Result<Var> {
        let q = self.q.forward(s, queries)?;
        let k = self.k.forward(s, memory)?;
        let v = self.v.forward(s, memory)?;
        let q = split_heads(s, q, cfg.n_heads)?;
        let k = split_heads(s, k, cfg.n_heads)?;
        let v = split_heads(s, v, cfg.n_heads)?;
        let ctx = match kind {
            AttentionKind::Full => full_attention(&mut s.graph, q, k, v, causal)?,
            AttentionKind::ProbSparse => {
                let (g, rng) = s.graph_and_rng();
                let sampling = if cfg.exact_sparsity {
                    Sampling::Exact
                } else {
                    Sampling::Random(rng)
                };
                probsparse_attention(g, q, k, v, cfg.sampling_factor, causal, sampling)?
            }
        };
        let ctx = merge_heads(s, ctx)?;
        self.o.forward(s, ctx)
    }
}

/// `[B, L, d] -> [B, H, L, d / H]`
fn split_heads(s: &mut Session, x: Var, heads: usize) -> Result<Var> {
    let shape = s.graph.shape(x).to_vec();
    let (b, l, d) = (shape[0], shape[1], shape[2]);
    if d % heads != 0 {
        return Err(Error::Config(format!("d_model {d} is not divisible by {heads} heads")));
    }
    let x = s.graph.reshape(x, &[b, l, heads, d / heads])?;
    s.graph.permute(x, &[0, 2, 1, 3])
}

/// `[B, H, L, d_head] -> [B, L, H * d_head]`
fn merge_heads(s: &mut Session, x: Var) -> Result<Var> {
    let shape = s.graph.shape(x).to_vec();
    let x = s.graph.permute(x, &[0, 2, 1, 3])?;
    s.graph.reshape(x, &[shape[0], shape[2], shape[1] * shape[3]])
}

/// Position-wise `ReLU(x W1 + b1) W2 + b2`.
#[derive(Debug, Clone, Copy)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, d_model: usize, d_ff: usize, rng: &mut R) -> Self {
        FeedForward {
            up: Linear::new(store, &format!("{name}.up"), d_model, d_ff, rng),
            down: Linear::new(store, &format!("{name}.down"), d_ff, d_model, rng),
        }
    }

    pub fn forward(&self, s: &mut Session, x: Var, dropout: f64) -> Result<Var> {
        let h = self.up.forward(s, x)?;
        let h = s.graph.relu(h);
        let h = s.dropout(h, dropout)?;
        self.down.forward(s, h)
    }
}

/// Post-norm self-attention block followed by a feed-forward block.
#[derive(Debug, Clone, Copy)]
pub struct EncoderLayer {
    pub attn: MultiHeadAttention,
    pub norm1: LayerNorm,
    pub ff: FeedForward,
    pub norm2: LayerNorm,
}

impl EncoderLayer {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, d_model: usize, d_ff: usize, rng: &mut R) -> Self {
        EncoderLayer {
            attn: MultiHeadAttention::new(store, &format!("{name}.attn"), d_model, rng),
            norm1: LayerNorm::new(store, &format!("{name}.norm1"), d_model),
            ff: FeedForward::new(store, &format!("{name}.ff"), d_model, d_ff, rng),
            norm2: LayerNorm::new(store, &format!("{name}.norm2"), d_model),
        }
    }

    pub fn forward(&self, s: &mut Session, x: Var, kind: AttentionKind, cfg: AttentionSettings, dropout: f64) -> Result<Var> {
        let a = self.attn.forward(s, x, x, kind, false, cfg)?;
        let a = s.dropout(a, dropout)?;
        let x = s.graph.add(x, a)?;
        let x = self.norm1.forward(s, x)?;
        let y = self.ff.forward(s, x, dropout)?;
        let y = s.dropout(y, dropout)?;
        let x = s.graph.add(x, y)?;
        self.norm2.forward(s, x)
    }
}

/// Width-3 circular convolution, ELU and stride-2 max pooling.
#[derive(Debug, Clone, Copy)]
pub struct DistillLayer {
    pub kernel: ParamId,
    pub bias: ParamId,
}

impl DistillLayer {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, d_model: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((3 * d_model) as f64).sqrt();
        DistillLayer {
            kernel: store.uniform(format!("{name}.kernel"), &[3, d_model, d_model], bound, rng),
            bias: store.uniform(format!("{name}.bias"), &[d_model], bound, rng),
        }
    }

    /// Halves the length (rounding up); a single slot passes through unchanged.
    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        if s.graph.shape(x).get(1) == Some(&1) {
            return Ok(x);
        }
        let k = s.param(self.kernel);
        let b = s.param(self.bias);
        let y = s.graph.conv1d(x, k, Padding::Circular)?;
        let y = s.graph.add_bias(y, b)?;
        let y = s.graph.elu(y);
        s.graph.max_pool(y)
    }
}

/// Causal self-attention, cross-attention over the encoder output and a
/// feed-forward block, each followed by a residual and layer norm.
#[derive(Debug, Clone, Copy)]
pub struct DecoderLayer {
    pub self_attn: MultiHeadAttention,
    pub norm1: LayerNorm,
    pub cross_attn: MultiHeadAttention,
    pub norm2: LayerNorm,
    pub ff: FeedForward,
    pub norm3: LayerNorm,
}

impl DecoderLayer {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, d_model: usize, d_ff: usize, rng: &mut R) -> Self {
        DecoderLayer {
            self_attn: MultiHeadAttention::new(store, &format!("{name}.self_attn"), d_model, rng),
            norm1: LayerNorm::new(store, &format!("{name}.norm1"), d_model),
            cross_attn: MultiHeadAttention::new(store, &format!("{name}.cross_attn"), d_model, rng),
            norm2: LayerNorm::new(store, &format!("{name}.norm2"), d_model),
            ff: FeedForward::new(store, &format!("{name}.ff"), d_model, d_ff, rng),
            norm3: LayerNorm::new(store, &format!("{name}.norm3"), d_model),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn forward(
        &self,
        s: &mut Session,
        x: Var,
        memory: Var,
        self_kind: AttentionKind,
        cross_kind: AttentionKind,
        cfg: AttentionSettings,
        dropout: f64,
    ) -> Result<Var> {
        let a = self.self_attn.forward(s, x, x, self_kind, true, cfg)?;
        let a = s.dropout(a, dropout)?;
        let x = s.graph.add(x, a)?;
        let x = self.norm1.forward(s, x)?;
        let c = self.cross_attn.forward(s, x, memory, cross_kind, false, cfg)?;
        let c = s.dropout(c, dropout)?;
        let x = s.graph.add(x, c)?;
        let x = self.norm2.forward(s, x)?;
        let y = self.ff.forward(s, x, dropout)?;
        let y = s.dropout(y, dropout)?;
        let x = s.graph.add(x, y)?;
        self.norm3.forward(s, x)
    }
}
