use serde::{Deserialize, Serialize};

use super::{Cycle, N_FEATURES};

/// Input block `X_t` (slots `t - T_in ..= t - 1`) and SoC target `Y_t`
/// (slots `t ..= t + T_out - 1`), with `t = t_origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub cycle_id: String,
    pub t_origin: usize,
    /// Row-major `(T_in, 3)` of normalised `(current, voltage, temperature)`.
    pub input: Vec<f64>,
    /// Raw SoC for each forecast slot.
    pub target: Vec<f64>,
}

impl WindowSample {
    pub fn t_in(&self) -> usize {
        self.input.len() / N_FEATURES
    }

    pub fn t_out(&self) -> usize {
        self.target.len()
    }

    /// Horizon-averaged ground truth.
    pub fn target_mean(&self) -> f64 {
        self.target.iter().sum::<f64>() / self.target.len() as f64
    }
}

/// `floor((L - T_in - T_out) / stride) + 1`, or 0 when the cycle is too short.
pub fn window_count(len: usize, t_in: usize, t_out: usize, stride: usize) -> usize {
    if stride == 0 || len < t_in + t_out {
        0
    } else {
        (len - t_in - t_out) / stride + 1
    }
}

/// Overlapping windows inside one cycle. Never crosses a cycle boundary.
pub fn make_windows(cycle: &Cycle, t_in: usize, t_out: usize, stride: usize) -> Vec<WindowSample> {
    let len = cycle.len();
    let count = window_count(len, t_in, t_out, stride);
    if count == 0 {
        log::warn!(
            "cycle {} has {len} slots, fewer than T_in + T_out = {}; no windows",
            cycle.id,
            t_in + t_out
        );
        return Vec::new();
    }
    (0..count)
        .map(|k| {
            let t = t_in + k * stride;
            WindowSample {
                cycle_id: cycle.id.clone(),
                t_origin: t,
                input: cycle.records[t - t_in..t]
                    .iter()
                    .flat_map(|r| r.features())
                    .collect(),
                target: cycle.records[t..t + t_out].iter().map(|r| r.soc).collect(),
            }
        })
        .collect()
}
