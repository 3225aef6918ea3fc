//! Flat `key=value` run configuration merged from a file and command-line flags.

use std::collections::BTreeSet;
use std::path::Path;

use ginet_core::data::PrepareSettings;
use ginet_core::gru::GruConfig;
use ginet_core::informer::{AttentionKind, InformerConfig};
use ginet_core::model::Variant;
use ginet_core::train::TrainConfig;
use ginet_core::{Error, GiNetConfig, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub prepare: PrepareSettings,
    pub model: GiNetConfig,
    pub train: TrainConfig,
    /// `label_len` follows `t_in / 2` unless set explicitly.
    label_len: Option<usize>,
    explicit: BTreeSet<&'static str>,
}

pub const KEYS: [&str; 30] = [
    "t_in",
    "t_out",
    "stride",
    "slot_seconds",
    "capacity_ah",
    "split_ratio",
    "test_cycles",
    "variant",
    "label_len",
    "d_model",
    "n_heads",
    "d_ff",
    "e_layers",
    "d_layers",
    "attention",
    "cross_attention",
    "distill",
    "sampling_factor",
    "exact_sparsity",
    "informer_dropout",
    "gru_hidden",
    "gru_layers",
    "gru_dropout",
    "batch_size",
    "lr",
    "max_epochs",
    "patience",
    "lr_decay",
    "scheduler",
    "seed",
];

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            prepare: PrepareSettings::default(),
            model: GiNetConfig::default(),
            train: TrainConfig::default(),
            label_len: None,
            explicit: BTreeSet::new(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for key \"{key}\"")))
}

pub fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid value {value:?} for key \"{key}\" (expected on or off)"))),
    }
}

fn parse_attention(key: &str, value: &str) -> Result<AttentionKind> {
    match value.to_ascii_lowercase().as_str() {
        "probsparse" | "prob" => Ok(AttentionKind::ProbSparse),
        "full" => Ok(AttentionKind::Full),
        _ => Err(Error::Config(format!(
            "invalid value {value:?} for key \"{key}\" (expected probsparse or full)"
        ))),
    }
}

fn attention_name(kind: AttentionKind) -> &'static str {
    match kind {
        AttentionKind::ProbSparse => "probsparse",
        AttentionKind::Full => "full",
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

impl RunConfig {
    /// Applies one `key=value` pair. Unknown keys are rejected by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        let Some(&canonical) = KEYS.iter().find(|k| **k == key) else {
            return Err(Error::Config(format!("unknown config key \"{key}\"")));
        };
        let (p, m, t) = (&mut self.prepare, &mut self.model, &mut self.train);
        match canonical {
            "t_in" => {
                p.t_in = parse_num(key, value)?;
                m.t_in = p.t_in;
            }
            "t_out" => {
                p.t_out = parse_num(key, value)?;
                m.t_out = p.t_out;
            }
            "stride" => p.stride = parse_num(key, value)?,
            "slot_seconds" => {
                p.slot_seconds = parse_num(key, value)?;
                m.slot_seconds = p.slot_seconds;
            }
            "capacity_ah" => p.nominal_capacity_ah = parse_num(key, value)?,
            "split_ratio" => {
                let parts = value
                    .split(':')
                    .map(|s| parse_num::<usize>(key, s))
                    .collect::<Result<Vec<_>>>()?;
                p.ratio = parts
                    .try_into()
                    .map_err(|_| Error::Config(format!("split_ratio needs three parts like 10:2:5, got {value:?}")))?;
            }
            "test_cycles" => {
                p.test_ids = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect();
            }
            "variant" => m.variant = value.parse::<Variant>()?,
            "label_len" => self.label_len = Some(parse_num(key, value)?),
            "d_model" => m.informer.d_model = parse_num(key, value)?,
            "n_heads" => m.informer.n_heads = parse_num(key, value)?,
            "d_ff" => m.informer.d_ff = parse_num(key, value)?,
            "e_layers" => m.informer.e_layers = parse_num(key, value)?,
            "d_layers" => m.informer.d_layers = parse_num(key, value)?,
            "attention" => m.informer.attention = parse_attention(key, value)?,
            "cross_attention" => m.informer.cross_attention = parse_attention(key, value)?,
            "distill" => m.informer.distill = parse_bool(key, value)?,
            "sampling_factor" => m.informer.sampling_factor = parse_num(key, value)?,
            "exact_sparsity" => m.informer.exact_sparsity = parse_bool(key, value)?,
            "informer_dropout" => m.informer.dropout = parse_num(key, value)?,
            "gru_hidden" => m.gru.hidden_dim = parse_num(key, value)?,
            "gru_layers" => m.gru.num_layers = parse_num(key, value)?,
            "gru_dropout" => m.gru.dropout = parse_num(key, value)?,
            "batch_size" => t.batch_size = parse_num(key, value)?,
            "lr" => t.lr = parse_num(key, value)?,
            "max_epochs" => t.max_epochs = parse_num(key, value)?,
            "patience" => t.patience = parse_num(key, value)?,
            "lr_decay" => t.lr_decay = parse_num(key, value)?,
            "scheduler" => t.scheduler = parse_bool(key, value)?,
            "seed" => {
                t.seed = parse_num(key, value)?;
                p.seed = t.seed;
            }
            _ => unreachable!("key list and match arms out of sync: {canonical}"),
        }
        m.label_len = self.label_len.unwrap_or(m.t_in / 2);
        self.explicit.insert(canonical);
        Ok(())
    }

    /// Parses `key=value` lines; `#` starts a comment, blank lines are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// Model config with window sizes taken from a prepared dataset. Explicit
    /// `t_in`/`t_out`/`slot_seconds` settings that disagree with it are errors.
    pub fn model_for_dataset(&self, t_in: usize, t_out: usize, slot_seconds: f64) -> Result<GiNetConfig> {
        for (key, want, have) in [
            ("t_in", self.model.t_in as f64, t_in as f64),
            ("t_out", self.model.t_out as f64, t_out as f64),
            ("slot_seconds", self.model.slot_seconds, slot_seconds),
        ] {
            if self.is_explicit(key) && want != have {
                return Err(Error::Config(format!("{key}={want} does not match the dataset's {key}={have}")));
            }
        }
        let mut m = self.model.clone();
        m.t_in = t_in;
        m.t_out = t_out;
        m.slot_seconds = slot_seconds;
        m.label_len = self.label_len.unwrap_or(t_in / 2);
        m.validate()?;
        Ok(m)
    }

    /// Effective configuration as `key=value` lines in a fixed order.
    pub fn to_text(&self) -> String {
        let (p, m, t) = (&self.prepare, &self.model, &self.train);
        let i: &InformerConfig = &m.informer;
        let g: &GruConfig = &m.gru;
        let ratio = p.ratio.map(|r| r.to_string()).join(":");
        let lines = [
            format!("t_in={}", m.t_in),
            format!("t_out={}", m.t_out),
            format!("stride={}", p.stride),
            format!("slot_seconds={}", p.slot_seconds),
            format!("capacity_ah={}", p.nominal_capacity_ah),
            format!("split_ratio={ratio}"),
            format!("test_cycles={}", p.test_ids.join(",")),
            format!("variant={}", m.variant),
            format!("label_len={}", m.label_len),
            format!("d_model={}", i.d_model),
            format!("n_heads={}", i.n_heads),
            format!("d_ff={}", i.d_ff),
            format!("e_layers={}", i.e_layers),
            format!("d_layers={}", i.d_layers),
            format!("attention={}", attention_name(i.attention)),
            format!("cross_attention={}", attention_name(i.cross_attention)),
            format!("distill={}", on_off(i.distill)),
            format!("sampling_factor={}", i.sampling_factor),
            format!("exact_sparsity={}", on_off(i.exact_sparsity)),
            format!("informer_dropout={}", i.dropout),
            format!("gru_hidden={}", g.hidden_dim),
            format!("gru_layers={}", g.num_layers),
            format!("gru_dropout={}", g.dropout),
            format!("batch_size={}", t.batch_size),
            format!("lr={}", t.lr),
            format!("max_epochs={}", t.max_epochs),
            format!("patience={}", t.patience),
            format!("lr_decay={}", t.lr_decay),
            format!("scheduler={}", on_off(t.scheduler)),
            format!("seed={}", t.seed),
        ];
        lines.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ginet_core::data::DEFAULT_RATIO;

    #[test]
    fn defaults_match_library_defaults() {
        let c = RunConfig::default();
        assert_eq!(c.prepare.ratio, DEFAULT_RATIO);
        assert_eq!(c.model.label_len, 50);
        assert_eq!(c.train.batch_size, 32);
    }

    #[test]
    fn text_round_trips() {
        let mut c = RunConfig::from_text("t_in = 40 # window\n\nvariant=gru\nattention=full\nsplit_ratio=3:1:1\n").unwrap();
        c.set("test_cycles", "a, b").unwrap();
        assert_eq!(c.model.t_in, 40);
        assert_eq!(c.model.label_len, 20);
        assert_eq!(c.prepare.test_ids, vec!["a", "b"]);
        let again = RunConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(again.to_text(), c.to_text());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_text("t_in=10\nlearning_rate=0.1\n").unwrap_err();
        assert!(err.to_string().contains("\"learning_rate\""), "{err}");
        assert!(RunConfig::from_text("just text").is_err());
        assert!(RunConfig::from_text("distill=maybe").is_err());
    }

    #[test]
    fn dataset_mismatch_only_when_explicit() {
        let c = RunConfig::default();
        assert_eq!(c.model_for_dataset(12, 3, 1.0).unwrap().label_len, 6);
        let c = RunConfig::from_text("t_in=20").unwrap();
        assert!(c.model_for_dataset(12, 3, 1.0).is_err());
    }
}
