//! Stacked GRU feature extractor with a per-slot projection back to the
//! input feature space.
//!
//! Gate convention:
//!
//! ```text
//! z  = sigmoid(W_z x + U_z h + b_z)
//! r  = sigmoid(W_r x + U_r h + b_r)
//! h~ = tanh(W_c x + U_c (r * h) + b_c)
//! h' = (1 - z) * h + z * h~
//! ```

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Mode, ParamId, ParamStore, Session, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    /// Applied between stacked layers in train mode.
    pub dropout: f64,
}

impl Default for GruConfig {
    fn default() -> Self {
        GruConfig {
            input_dim: 3,
            hidden_dim: 1024,
            num_layers: 2,
            dropout: 0.2,
        }
    }
}

impl GruConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.num_layers == 0 {
            return Err(Error::Config(format!("GRU dimensions must be positive: {self:?}")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("GRU dropout must be in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }
}

/// Parameters of one recurrent layer. Gate columns are ordered `[z | r | c]`.
#[derive(Debug, Clone, Copy)]
pub struct GruLayerParams {
    /// `[input_dim, 3H]`
    pub w_x: ParamId,
    /// `[3H]`
    pub bias: ParamId,
    /// `[H, 2H]`, columns `[z | r]`
    pub u_zr: ParamId,
    /// `[H, H]`
    pub u_c: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl GruLayerParams {
    fn new<R: Rng>(store: &mut ParamStore, prefix: &str, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let h = hidden_dim;
        GruLayerParams {
            w_x: store.uniform(format!("{prefix}.w_x"), &[input_dim, 3 * h], bound, rng),
            bias: store.uniform(format!("{prefix}.bias"), &[3 * h], bound, rng),
            u_zr: store.uniform(format!("{prefix}.u_zr"), &[h, 2 * h], bound, rng),
            u_c: store.uniform(format!("{prefix}.u_c"), &[h, h], bound, rng),
            input_dim,
            hidden_dim,
        }
    }

    /// One step given the pre-computed input contribution `xw = W x + b`
    /// (`[B, 1, 3H]`) and the previous state `h` (`[B, 1, H]`).
    fn step(&self, s: &mut Session, xw: Var, h: Var) -> Result<Var> {
        let hd = self.hidden_dim;
        let u_zr = s.param(self.u_zr);
        let u_c = s.param(self.u_c);
        let g = &mut s.graph;
        let xz = g.narrow(xw, 2, 0, hd)?;
        let xr = g.narrow(xw, 2, hd, hd)?;
        let xc = g.narrow(xw, 2, 2 * hd, hd)?;
        let hzr = g.matmul(h, u_zr)?;
        let hz = g.narrow(hzr, 2, 0, hd)?;
        let hr = g.narrow(hzr, 2, hd, hd)?;
        let z = g.add(xz, hz)?;
        let z = g.sigmoid(z);
        let r = g.add(xr, hr)?;
        let r = g.sigmoid(r);
        let rh = g.mul(r, h)?;
        let uc = g.matmul(rh, u_c)?;
        let c = g.add(xc, uc)?;
        let c = g.tanh(c);
        let delta = g.sub(c, h)?;
        let zd = g.mul(z, delta)?;
        g.add(h, zd)
    }

    /// Runs the layer over `x[B, T, input_dim]`, returning `[B, T, H]`.
    fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let shape = s.graph.shape(x).to_vec();
        if shape.len() != 3 || shape[2] != self.input_dim {
            return Err(Error::dim("gru_layer", &shape, &[self.input_dim]));
        }
        let (batch, steps) = (shape[0], shape[1]);
        let w_x = s.param(self.w_x);
        let bias = s.param(self.bias);
        let xw = s.graph.matmul(x, w_x)?;
        let xw = s.graph.add_bias(xw, bias)?;
        let mut h = s.graph.zeros(&[batch, 1, self.hidden_dim]);
        let mut states = Vec::with_capacity(steps);
        for t in 0..steps {
            let xt = s.graph.narrow(xw, 1, t, 1)?;
            h = self.step(s, xt, h)?;
            states.push(h);
        }
        s.graph.concat(&states, 1)
    }
}

/// Outputs of [`GruEncoder::forward`].
#[derive(Debug, Clone, Copy)]
pub struct GruOutput {
    /// Top-layer hidden sequence `[B, T, H]`.
    pub hidden: Var,
    /// Top-layer final state `[B, H]`.
    pub last: Var,
    /// Per-slot projection `[B, T, input_dim]`, when the encoder has one.
    pub projected: Option<Var>,
}

#[derive(Debug, Clone)]
pub struct GruEncoder {
    pub config: GruConfig,
    pub layers: Vec<GruLayerParams>,
    /// `(weight [H, input_dim], bias [input_dim])`
    pub projection: Option<(ParamId, ParamId)>,
}

impl GruEncoder {
    /// Registers parameters under `prefix`. Weights are drawn from
    /// `U(-1/sqrt(H), 1/sqrt(H))`.
    pub fn new<R: Rng>(config: GruConfig, store: &mut ParamStore, prefix: &str, with_projection: bool, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::with_capacity(config.num_layers);
        for l in 0..config.num_layers {
            let input = if l == 0 { config.input_dim } else { config.hidden_dim };
            layers.push(GruLayerParams::new(store, &format!("{prefix}.layer{l}"), input, config.hidden_dim, rng));
        }
        let projection = with_projection.then(|| {
            let bound = 1.0 / (config.hidden_dim as f64).sqrt();
            (
                store.uniform(format!("{prefix}.proj.w"), &[config.hidden_dim, config.input_dim], bound, rng),
                store.uniform(format!("{prefix}.proj.b"), &[config.input_dim], bound, rng),
            )
        });
        Ok(GruEncoder {
            config,
            layers,
            projection,
        })
    }

    /// `x[B, T, input_dim]` with a zero initial state. Dropout between layers
    /// is active only in train mode.
    pub fn forward(&self, s: &mut Session, x: Var) -> Result<GruOutput> {
        let shape = s.graph.shape(x).to_vec();
        if shape.len() != 3 || shape[1] == 0 {
            return Err(Error::Contract(format!("GRU input must be [B, T>0, F], got {shape:?}")));
        }
        let mut h = x;
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                h = s.dropout(h, self.config.dropout)?;
            }
            h = layer.forward(s, h)?;
        }
        let (batch, steps) = (shape[0], shape[1]);
        let last = s.graph.narrow(h, 1, steps - 1, 1)?;
        let last = s.graph.reshape(last, &[batch, self.config.hidden_dim])?;
        let projected = match self.projection {
            Some((w, b)) => {
                let w = s.param(w);
                let b = s.param(b);
                let p = s.graph.matmul(h, w)?;
                Some(s.graph.add_bias(p, b)?)
            }
            None => None,
        };
        Ok(GruOutput {
            hidden: h,
            last,
            projected,
        })
    }
}

/// Single GRU cell update on plain vectors, evaluated with `layer`'s parameters.
pub fn gru_cell_step(store: &ParamStore, layer: &GruLayerParams, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
    if x.len() != layer.input_dim || h_prev.len() != layer.hidden_dim {
        return Err(Error::dim(
            "gru_cell_step",
            &[x.len(), h_prev.len()],
            &[layer.input_dim, layer.hidden_dim],
        ));
    }
    let mut s = Session::new(store, Mode::Eval, ChaCha8Rng::seed_from_u64(0));
    let xv = s.graph.constant(&[1, 1, layer.input_dim], x.to_vec())?;
    let hv = s.graph.constant(&[1, 1, layer.hidden_dim], h_prev.to_vec())?;
    let w_x = s.param(layer.w_x);
    let bias = s.param(layer.bias);
    let xw = s.graph.matmul(xv, w_x)?;
    let xw = s.graph.add_bias(xw, bias)?;
    let h = layer.step(&mut s, xw, hv)?;
    Ok(s.graph.value(h).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeroed(store: &mut ParamStore) {
        for id in store.ids().collect::<Vec<_>>() {
            store.get_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn encoder(hidden: usize, store: &mut ParamStore) -> GruEncoder {
        let cfg = GruConfig {
            hidden_dim: hidden,
            ..GruConfig::default()
        };
        GruEncoder::new(cfg, store, "gru", true, &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn zero_weights_halve_the_state() {
        let mut store = ParamStore::new();
        let enc = encoder(4, &mut store);
        zeroed(&mut store);
        let h = [0.4, -0.2, 1.0, 0.0];
        let out = gru_cell_step(&store, &enc.layers[0], &[1.0, 2.0, 3.0], &h).unwrap();
        for (o, hv) in out.iter().zip(h) {
            assert!((o - 0.5 * hv).abs() < 1e-15);
        }
        let out = gru_cell_step(&store, &enc.layers[0], &[1.0, 2.0, 3.0], &[0.0; 4]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn default_width_is_1024() {
        let mut store = ParamStore::new();
        let enc = GruEncoder::new(GruConfig::default(), &mut store, "gru", true, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let out = gru_cell_step(&store, &enc.layers[0], &[0.1, 0.2, 0.3], &vec![0.0; 1024]).unwrap();
        assert_eq!(out.len(), 1024);
        assert!(gru_cell_step(&store, &enc.layers[0], &[0.1, 0.2], &vec![0.0; 1024]).is_err());
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = GruConfig {
            dropout: 1.0,
            ..GruConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GruConfig {
            hidden_dim: 0,
            ..GruConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
