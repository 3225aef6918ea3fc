//! GiNet: GRU features fused into the raw window, fed to an Informer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{WindowSample, N_FEATURES};
use crate::error::{Error, Result};
use crate::gru::{GruConfig, GruEncoder};
use crate::informer::{Informer, InformerConfig, Linear};
use crate::tensor::{Graph, ParamStore, Session, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    GiNet,
    #[serde(rename = "informer")]
    InformerOnly,
    #[serde(rename = "gru")]
    GruOnly,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ginet" => Ok(Variant::GiNet),
            "informer" | "informeronly" => Ok(Variant::InformerOnly),
            "gru" | "gruonly" => Ok(Variant::GruOnly),
            _ => Err(Error::Config(format!("unknown variant {s:?} (expected ginet, informer or gru)"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::GiNet => "ginet",
            Variant::InformerOnly => "informer",
            Variant::GruOnly => "gru",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiNetConfig {
    pub t_in: usize,
    pub t_out: usize,
    pub label_len: usize,
    /// Seconds per slot; slot times fed to the temporal embedding are in hours.
    pub slot_seconds: f64,
    pub variant: Variant,
    pub gru: GruConfig,
    pub informer: InformerConfig,
}

impl Default for GiNetConfig {
    fn default() -> Self {
        GiNetConfig {
            t_in: 100,
            t_out: 10,
            label_len: 50,
            slot_seconds: 1.0,
            variant: Variant::GiNet,
            gru: GruConfig::default(),
            informer: InformerConfig::default(),
        }
    }
}

impl GiNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_in == 0 || self.t_out == 0 {
            return Err(Error::Config(format!("T_in and T_out must be positive, got {} and {}", self.t_in, self.t_out)));
        }
        if self.label_len > self.t_in {
            return Err(Error::Config(format!("label_len {} exceeds T_in {}", self.label_len, self.t_in)));
        }
        if !(self.slot_seconds > 0.0) {
            return Err(Error::Config(format!("slot_seconds must be positive, got {}", self.slot_seconds)));
        }
        if self.gru.input_dim != N_FEATURES || self.informer.input_dim != N_FEATURES {
            return Err(Error::Config(format!("model input width must be {N_FEATURES}")));
        }
        self.gru.validate()?;
        self.informer.validate()
    }
}

/// `F = H + X`.
pub fn fuse(g: &mut Graph, h: Var, x: Var) -> Result<Var> {
    if g.shape(h) != g.shape(x) {
        return Err(Error::dim("fuse", g.shape(h), g.shape(x)));
    }
    g.add(h, x)
}

/// Mean of a horizon of predictions.
pub fn average_horizon(y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::Contract("cannot average an empty horizon".into()));
    }
    Ok(y.iter().sum::<f64>() / y.len() as f64)
}

/// Model inputs for a batch of windows. Holds no targets.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchInputs {
    pub batch: usize,
    /// `[batch, T_in, 3]` row-major.
    pub x: Vec<f64>,
    /// `batch * (T_in + T_out)` slot times in hours: input window, then horizon.
    pub times: Vec<f64>,
}

impl BatchInputs {
    pub fn from_windows(windows: &[&WindowSample], config: &GiNetConfig) -> Result<Self> {
        let (t_in, t_out) = (config.t_in, config.t_out);
        let mut x = Vec::with_capacity(windows.len() * t_in * N_FEATURES);
        let mut times = Vec::with_capacity(windows.len() * (t_in + t_out));
        for w in windows {
            if w.input.len() != t_in * N_FEATURES {
                return Err(Error::dim("window input", &[w.input.len()], &[t_in, N_FEATURES]));
            }
            x.extend_from_slice(&w.input);
            let first = w.t_origin as f64 - t_in as f64;
            times.extend((0..t_in + t_out).map(|j| (first + j as f64) * config.slot_seconds / 3600.0));
        }
        Ok(BatchInputs {
            batch: windows.len(),
            x,
            times,
        })
    }
}

#[derive(Debug, Clone)]
pub struct GiNet {
    pub config: GiNetConfig,
    pub informer: Option<Informer>,
    pub gru: Option<GruEncoder>,
    /// Final hidden state to the horizon, for the GRU-only baseline.
    pub gru_head: Option<Linear>,
}

impl GiNet {
    /// Informer parameters are registered before GRU parameters, so variants
    /// built from the same seed share identical Informer weights.
    pub fn new<R: Rng>(config: GiNetConfig, store: &mut ParamStore, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let informer = match config.variant {
            Variant::GruOnly => None,
            _ => Some(Informer::new(config.informer.clone(), store, "informer", rng)?),
        };
        let (gru, gru_head) = match config.variant {
            Variant::InformerOnly => (None, None),
            Variant::GiNet => (Some(GruEncoder::new(config.gru.clone(), store, "gru", true, rng)?), None),
            Variant::GruOnly => (
                Some(GruEncoder::new(config.gru.clone(), store, "gru", false, rng)?),
                Some(Linear::new(store, "gru_head", config.gru.hidden_dim, config.t_out, rng)),
            ),
        };
        Ok(GiNet {
            config,
            informer,
            gru,
            gru_head,
        })
    }

    /// `x[B, T_in, 3]` to `[B, T_out]`.
    pub fn forward(&self, s: &mut Session, x: Var, times: &[f64]) -> Result<Var> {
        let c = &self.config;
        let shape = s.graph.shape(x).to_vec();
        if shape.len() != 3 || shape[1] != c.t_in || shape[2] != N_FEATURES {
            return Err(Error::dim("ginet", &shape, &[c.t_in, N_FEATURES]));
        }
        match (c.variant, &self.gru, &self.informer, &self.gru_head) {
            (Variant::GiNet, Some(gru), Some(inf), _) => {
                let h = gru.forward(s, x)?;
                let h = h.projected.ok_or_else(|| Error::Contract("GRU projection missing".into()))?;
                let f = fuse(&mut s.graph, h, x)?;
                inf.forward(s, f, times, c.label_len, c.t_out)
            }
            (Variant::InformerOnly, _, Some(inf), _) => inf.forward(s, x, times, c.label_len, c.t_out),
            (Variant::GruOnly, Some(gru), _, Some(head)) => {
                let h = gru.forward(s, x)?;
                head.forward(s, h.last)
            }
            _ => Err(Error::Contract(format!("model parts do not match variant {}", c.variant))),
        }
    }

    pub fn forward_batch(&self, s: &mut Session, inputs: &BatchInputs) -> Result<Var> {
        let x = s.graph.constant(&[inputs.batch, self.config.t_in, N_FEATURES], inputs.x.clone())?;
        self.forward(s, x, &inputs.times)
    }
}
