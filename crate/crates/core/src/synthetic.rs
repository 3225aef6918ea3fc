//! Synthetic discharge cycles in the raw CSV layout.
//!
//! Each cycle draws a piecewise-constant current profile (mostly discharge,
//! with rests and short regenerative pulses) and integrates a first-order
//! equivalent circuit:
//!
//! ```text
//! V   = OCV(soc) + R0(T) I + V_rc + noise
//! V_rc <- V_rc e^(-dt/tau) + R1(T) I (1 - e^(-dt/tau))
//! T   <- T + dt ((T_amb - T) / tau_th + k I^2 R0(T))
//! ah  <- ah + I dt / 3600
//! ```
//!
//! Internal resistance grows as the cell gets colder. The cycle ends when the
//! state of charge reaches `min_soc` or after `max_seconds`.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{REQUIRED_COLUMNS, DEFAULT_CAPACITY_AH};
use crate::error::{Error, Result};

pub const AMBIENT_TEMPERATURES: [f64; 4] = [-10.0, 0.0, 10.0, 25.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_cycles: usize,
    /// Spacing of the emitted rows.
    pub sample_seconds: f64,
    pub max_seconds: f64,
    pub capacity_ah: f64,
    /// Mean discharge current magnitude in amperes.
    pub mean_current: f64,
    pub min_soc: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_cycles: 20,
            sample_seconds: 1.0,
            max_seconds: 3600.0,
            capacity_ah: DEFAULT_CAPACITY_AH,
            mean_current: 3.0,
            min_soc: 0.05,
            seed: 0,
        }
    }
}

/// One raw row: `timestamp_s, voltage_V, current_A, temperature_C, amp_hours_Ah`.
pub type RawRow = [f64; 5];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCycle {
    pub name: String,
    pub ambient_temperature: f64,
    pub rows: Vec<RawRow>,
}

/// Open-circuit voltage, monotone in `soc` from 3.0 V to 4.15 V.
pub fn ocv(soc: f64) -> f64 {
    3.0 + 0.55 * soc + 0.35 * (1.0 - (-12.0 * soc).exp()) + 0.25 * soc.powi(4)
}

fn resistance_factor(temp: f64) -> f64 {
    (0.03 * (25.0 - temp)).exp()
}

pub fn generate_cycle(cfg: &SynthConfig, index: usize, rng: &mut ChaCha8Rng) -> SyntheticCycle {
    let ambient = AMBIENT_TEMPERATURES[rng.random_range(0..AMBIENT_TEMPERATURES.len())];
    let dt = cfg.sample_seconds;
    let tau = 30.0;
    let tau_th = 600.0;
    let heat = 0.02;
    let v_noise = Normal::new(0.0, 0.002).unwrap();
    let i_noise = Normal::new(0.0, 0.01).unwrap();
    let t_noise = Normal::new(0.0, 0.05).unwrap();

    let soc0 = rng.random_range(0.85..1.0);
    let mut ah = (soc0 - 1.0) * cfg.capacity_ah;
    let mut temp = ambient + rng.random_range(-0.5..0.5);
    let mut v_rc = 0.0;
    let mut rows = Vec::new();
    let mut current = 0.0;
    let mut segment_left = 0.0;
    let mut t = 0.0;
    while t <= cfg.max_seconds {
        if segment_left <= 0.0 {
            segment_left = rng.random_range(10.0..90.0);
            let u: f64 = rng.random();
            current = if u < 0.12 {
                rng.random_range(0.2..2.0)
            } else if u < 0.22 {
                0.0
            } else {
                -rng.random_range(0.3..2.0 * cfg.mean_current)
            };
        }
        let soc = 1.0 + ah / cfg.capacity_ah;
        if soc <= cfg.min_soc {
            break;
        }
        let r0 = 0.03 * resistance_factor(temp);
        let r1 = 0.02 * resistance_factor(temp);
        let decay = (-dt / tau).exp();
        v_rc = v_rc * decay + r1 * current * (1.0 - decay);
        let voltage = ocv(soc) + r0 * current + v_rc;
        rows.push([
            t,
            voltage + v_noise.sample(rng),
            current + i_noise.sample(rng),
            temp + t_noise.sample(rng),
            ah,
        ]);
        ah = (ah + current * dt / 3600.0).min(0.0);
        temp += dt * ((ambient - temp) / tau_th + heat * current * current * r0);
        segment_left -= dt;
        t += dt;
    }
    let temp_tag = if ambient < 0.0 {
        format!("n{}degC", -ambient as i64)
    } else {
        format!("{}degC", ambient as i64)
    };
    SyntheticCycle {
        name: format!("synth_{index:03}_{temp_tag}_SYNTH"),
        ambient_temperature: ambient,
        rows,
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<Vec<SyntheticCycle>> {
    if cfg.n_cycles == 0 || !(cfg.sample_seconds > 0.0) || !(cfg.capacity_ah > 0.0) || !(cfg.mean_current > 0.0) {
        return Err(Error::Config(format!("invalid synthetic data settings: {cfg:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..cfg.n_cycles).map(|i| generate_cycle(cfg, i, &mut rng)).collect())
}

/// Writes one CSV per cycle into `dir` and returns the file paths.
pub fn write_synthetic_dataset(dir: &Path, cfg: &SynthConfig) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for cycle in generate(cfg)? {
        let path = dir.join(format!("{}.csv", cycle.name));
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Format(e.to_string()))?;
        w.write_record(REQUIRED_COLUMNS).map_err(|e| Error::Format(e.to_string()))?;
        for row in &cycle.rows {
            w.write_record(row.iter().map(|v| v.to_string()))
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ocv_is_monotone() {
        let mut prev = ocv(0.0);
        for i in 1..=100 {
            let v = ocv(i as f64 / 100.0);
            assert!(v > prev);
            prev = v;
        }
        assert!((ocv(1.0) - 4.15).abs() < 1e-3);
    }

    #[test]
    fn cycles_discharge_monotonically_on_average() {
        let cfg = SynthConfig {
            n_cycles: 3,
            max_seconds: 1200.0,
            ..SynthConfig::default()
        };
        let cycles = generate(&cfg).unwrap();
        assert_eq!(cycles, generate(&cfg).unwrap());
        for c in &cycles {
            assert!(c.rows.len() > 100);
            let first = c.rows.first().unwrap()[4];
            let last = c.rows.last().unwrap()[4];
            assert!(last < first, "{}", c.name);
            assert!(c.rows.windows(2).all(|w| w[1][0] > w[0][0]));
            assert!(c.rows.iter().all(|r| r[4] <= 0.0));
        }
    }
}
