use serde::{Deserialize, Serialize};

use super::{Cycle, N_FEATURES};
use crate::error::{Error, Result};

/// Per-feature min/max fitted on the training split only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: [f64; N_FEATURES],
    pub max: [f64; N_FEATURES],
}

impl NormStats {
    /// `(x - min) / (max - min)`, or 0 for a degenerate range.
    pub fn scale(&self, x: [f64; N_FEATURES]) -> [f64; N_FEATURES] {
        let mut out = [0.0; N_FEATURES];
        for i in 0..N_FEATURES {
            let range = self.max[i] - self.min[i];
            out[i] = if range > 0.0 { (x[i] - self.min[i]) / range } else { 0.0 };
        }
        out
    }
}

pub fn fit_normalize(train_cycles: &[Cycle]) -> Result<NormStats> {
    let mut min = [f64::INFINITY; N_FEATURES];
    let mut max = [f64::NEG_INFINITY; N_FEATURES];
    let mut seen = false;
    for r in train_cycles.iter().flat_map(|c| &c.records) {
        seen = true;
        for (i, v) in r.features().into_iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    if !seen {
        return Err(Error::Data("cannot fit normalisation on an empty training split".into()));
    }
    Ok(NormStats { min, max })
}

/// Rescales the input features; SoC labels are left as-is.
pub fn apply_normalize(stats: &NormStats, cycles: &[Cycle]) -> Vec<Cycle> {
    cycles
        .iter()
        .map(|c| {
            let mut c = c.clone();
            for r in &mut c.records {
                r.set_features(stats.scale(r.features()));
            }
            c
        })
        .collect()
}
