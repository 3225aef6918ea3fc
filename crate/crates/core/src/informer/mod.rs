//! Informer encoder-decoder: value/positional/temporal embedding, a stack of
//! self-attention layers with distillation between them, and a decoder that
//! reads a label segment followed by a zero placeholder for the horizon.

pub mod attention;
pub mod layers;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use attention::{active_queries, full_attention, probsparse_attention, sparsity_measure, AttentionKind, Sampling};
pub use layers::{AttentionSettings, DecoderLayer, DistillLayer, EncoderLayer, FeedForward, LayerNorm, Linear, MultiHeadAttention};

use crate::error::{Error, Result};
use crate::tensor::{Graph, Padding, ParamId, ParamStore, Session, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformerConfig {
    pub input_dim: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub e_layers: usize,
    pub d_layers: usize,
    /// Encoder self-attention and decoder self-attention.
    pub attention: AttentionKind,
    /// Decoder cross-attention.
    pub cross_attention: AttentionKind,
    pub distill: bool,
    pub sampling_factor: usize,
    /// Score every key when ranking queries instead of sampling.
    pub exact_sparsity: bool,
    pub dropout: f64,
}

impl Default for InformerConfig {
    fn default() -> Self {
        InformerConfig {
            input_dim: 3,
            d_model: 512,
            n_heads: 8,
            d_ff: 2048,
            e_layers: 2,
            d_layers: 1,
            attention: AttentionKind::ProbSparse,
            cross_attention: AttentionKind::Full,
            distill: true,
            sampling_factor: 5,
            exact_sparsity: false,
            dropout: 0.05,
        }
    }
}

impl InformerConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [self.input_dim, self.d_model, self.n_heads, self.d_ff, self.e_layers, self.d_layers, self.sampling_factor];
        if dims.contains(&0) {
            return Err(Error::Config(format!("Informer sizes must be positive: {self:?}")));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("Informer dropout must be in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }

    fn attention_settings(&self) -> AttentionSettings {
        AttentionSettings {
            n_heads: self.n_heads,
            sampling_factor: self.sampling_factor,
            exact_sparsity: self.exact_sparsity,
        }
    }
}

/// Sinusoidal table `[len, d]`: `sin(p / 10000^(2i/d))` on even columns,
/// the matching cosine on odd ones.
pub fn positional_encoding(len: usize, d: usize) -> Vec<f64> {
    let mut pe = vec![0.0; len * d];
    for p in 0..len {
        for j in 0..d {
            let angle = p as f64 / 10000f64.powf((j - j % 2) as f64 / d as f64);
            pe[p * d + j] = if j % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}

/// Value convolution (width 3, circular, no bias) plus positional encoding
/// plus an affine map of the slot time.
#[derive(Debug, Clone, Copy)]
pub struct DataEmbedding {
    pub value_kernel: ParamId,
    pub temporal_w: ParamId,
    pub temporal_b: ParamId,
}

impl DataEmbedding {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input_dim: usize, d_model: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((3 * input_dim) as f64).sqrt();
        DataEmbedding {
            value_kernel: store.uniform(format!("{name}.value"), &[3, input_dim, d_model], bound, rng),
            temporal_w: store.uniform(format!("{name}.temporal.w"), &[1, d_model], 1.0, rng),
            temporal_b: store.uniform(format!("{name}.temporal.b"), &[d_model], 1.0, rng),
        }
    }

    /// `x[B, L, input_dim]` with one time value per slot (`B * L` entries,
    /// row-major) to `[B, L, d_model]`.
    pub fn forward(&self, s: &mut Session, x: Var, times: &[f64]) -> Result<Var> {
        let shape = s.graph.shape(x).to_vec();
        let kshape = s.store().get(self.value_kernel).shape().to_vec();
        if shape.len() != 3 || shape[2] != kshape[1] {
            return Err(Error::Config(format!(
                "embedding expects [B, L, {}] input, got {shape:?}",
                kshape[1]
            )));
        }
        let (b, l, d) = (shape[0], shape[1], kshape[2]);
        if times.len() != b * l {
            return Err(Error::dim("embed(times)", &[b, l], &[times.len()]));
        }
        let kernel = s.param(self.value_kernel);
        let value = s.graph.conv1d(x, kernel, Padding::Circular)?;
        let pe = positional_encoding(l, d);
        let pe = s.graph.constant(&[b, l, d], pe.repeat(b))?;
        let t = s.graph.constant(&[b, l, 1], times.to_vec())?;
        let tw = s.param(self.temporal_w);
        let tb = s.param(self.temporal_b);
        let temporal = s.graph.matmul(t, tw)?;
        let temporal = s.graph.add_bias(temporal, tb)?;
        let out = s.graph.add(value, pe)?;
        s.graph.add(out, temporal)
    }
}

/// Decoder input: the last `label_len` slots of `x[B, T_in, F]` followed by
/// `t_out` zero rows.
pub fn build_decoder_input(g: &mut Graph, x: Var, label_len: usize, t_out: usize) -> Result<Var> {
    let shape = g.shape(x).to_vec();
    if shape.len() != 3 {
        return Err(Error::dim("build_decoder_input", &shape, &[]));
    }
    let (b, t_in, f) = (shape[0], shape[1], shape[2]);
    if label_len > t_in {
        return Err(Error::Config(format!("label_len {label_len} exceeds T_in {t_in}")));
    }
    if t_out == 0 {
        return Err(Error::Config("T_out must be positive".into()));
    }
    let zeros = g.zeros(&[b, t_out, f]);
    if label_len == 0 {
        return Ok(zeros);
    }
    let label = g.narrow(x, 1, t_in - label_len, label_len)?;
    g.concat(&[label, zeros], 1)
}

#[derive(Debug, Clone)]
pub struct Informer {
    pub config: InformerConfig,
    pub enc_embedding: DataEmbedding,
    pub dec_embedding: DataEmbedding,
    pub encoder: Vec<EncoderLayer>,
    pub distill: Vec<DistillLayer>,
    pub decoder: Vec<DecoderLayer>,
    pub head: Linear,
}

impl Informer {
    pub fn new<R: Rng>(config: InformerConfig, store: &mut ParamStore, prefix: &str, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (d, ff) = (config.d_model, config.d_ff);
        let enc_embedding = DataEmbedding::new(store, &format!("{prefix}.enc_embed"), config.input_dim, d, rng);
        let dec_embedding = DataEmbedding::new(store, &format!("{prefix}.dec_embed"), config.input_dim, d, rng);
        let encoder = (0..config.e_layers)
            .map(|i| EncoderLayer::new(store, &format!("{prefix}.enc{i}"), d, ff, rng))
            .collect();
        let n_distill = if config.distill { config.e_layers - 1 } else { 0 };
        let distill = (0..n_distill)
            .map(|i| DistillLayer::new(store, &format!("{prefix}.distill{i}"), d, rng))
            .collect();
        let decoder = (0..config.d_layers)
            .map(|i| DecoderLayer::new(store, &format!("{prefix}.dec{i}"), d, ff, rng))
            .collect();
        let head = Linear::new(store, &format!("{prefix}.head"), d, 1, rng);
        Ok(Informer {
            config,
            enc_embedding,
            dec_embedding,
            encoder,
            distill,
            decoder,
            head,
        })
    }

    pub fn embed_encoder(&self, s: &mut Session, x: Var, times: &[f64]) -> Result<Var> {
        let e = self.enc_embedding.forward(s, x, times)?;
        s.dropout(e, self.config.dropout)
    }

    pub fn embed_decoder(&self, s: &mut Session, x: Var, times: &[f64]) -> Result<Var> {
        let e = self.dec_embedding.forward(s, x, times)?;
        s.dropout(e, self.config.dropout)
    }

    /// Encoder layers with a distillation step between consecutive layers.
    pub fn encode(&self, s: &mut Session, x: Var) -> Result<Var> {
        let cfg = self.config.attention_settings();
        let mut h = x;
        for (i, layer) in self.encoder.iter().enumerate() {
            h = layer.forward(s, h, self.config.attention, cfg, self.config.dropout)?;
            if let Some(d) = self.distill.get(i) {
                h = d.forward(s, h)?;
            }
        }
        Ok(h)
    }

    pub fn decode(&self, s: &mut Session, dec: Var, memory: Var) -> Result<Var> {
        let cfg = self.config.attention_settings();
        let mut h = dec;
        for layer in &self.decoder {
            h = layer.forward(
                s,
                h,
                memory,
                self.config.attention,
                self.config.cross_attention,
                cfg,
                self.config.dropout,
            )?;
        }
        Ok(h)
    }

    /// `[B, L, d_model] -> [B, t_out]`, keeping the last `t_out` positions.
    pub fn project_output(&self, s: &mut Session, dec_out: Var, t_out: usize) -> Result<Var> {
        let shape = s.graph.shape(dec_out).to_vec();
        if shape.len() != 3 || t_out == 0 || t_out > shape[1] {
            return Err(Error::dim("project_output", &shape, &[t_out]));
        }
        let y = self.head.forward(s, dec_out)?;
        let y = s.graph.reshape(y, &[shape[0], shape[1]])?;
        s.graph.narrow(y, 1, shape[1] - t_out, t_out)
    }

    /// Full pass for `x[B, T_in, F]`. `times` holds `T_in + t_out` slot times
    /// per batch row: the input window followed by the forecast horizon.
    pub fn forward(&self, s: &mut Session, x: Var, times: &[f64], label_len: usize, t_out: usize) -> Result<Var> {
        let shape = s.graph.shape(x).to_vec();
        if shape.len() != 3 {
            return Err(Error::dim("informer", &shape, &[]));
        }
        let (b, t_in) = (shape[0], shape[1]);
        let span = t_in + t_out;
        if times.len() != b * span {
            return Err(Error::dim("informer(times)", &[b, span], &[times.len()]));
        }
        let enc_times: Vec<f64> = times.chunks(span).flat_map(|r| r[..t_in].iter().copied()).collect();
        let dec_times: Vec<f64> = times
            .chunks(span)
            .flat_map(|r| r[t_in - label_len.min(t_in)..].iter().copied())
            .collect();
        let dec_in = build_decoder_input(&mut s.graph, x, label_len, t_out)?;
        let enc = self.embed_encoder(s, x, &enc_times)?;
        let memory = self.encode(s, enc)?;
        let dec = self.embed_decoder(s, dec_in, &dec_times)?;
        let out = self.decode(s, dec, memory)?;
        self.project_output(s, out, t_out)
    }
}
