//! Battery telemetry ingestion, SoC labelling, normalisation, windowing and
//! cycle-level splitting.

pub(crate) mod dataset;
mod normalize;
mod parse;
mod prepare;
mod split;
mod window;

pub use dataset::{CycleInfo, PreparedDataset, Provenance, Split, DATASET_MAGIC, DATASET_VERSION};
pub use normalize::{apply_normalize, fit_normalize, NormStats};
pub use prepare::{prepare_cycles, prepare_dir, PrepareSettings};
pub use parse::{parse_cycle_file, parse_dataset, REQUIRED_COLUMNS};
pub use split::{split_cycles, split_cycles_with_test, split_sizes, DEFAULT_RATIO};
pub use window::{make_windows, window_count, WindowSample};

use serde::{Deserialize, Serialize};

/// Number of input features per slot: current, voltage, temperature.
pub const N_FEATURES: usize = 3;

/// Panasonic 18650PF rated capacity.
pub const DEFAULT_CAPACITY_AH: f64 = 2.9;

/// One aggregated time slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryRecord {
    /// Seconds since cycle start.
    pub timestamp: f64,
    /// Amperes, discharge negative.
    pub current: f64,
    pub voltage: f64,
    /// Degrees Celsius.
    pub temperature: f64,
    /// Cumulative ampere-hours, zero at full charge.
    pub amp_hours: f64,
    /// State of charge in `[0, 1]`; filled by [`derive_soc`].
    pub soc: f64,
}

impl BatteryRecord {
    /// Features in model order `(current, voltage, temperature)`.
    pub fn features(&self) -> [f64; N_FEATURES] {
        [self.current, self.voltage, self.temperature]
    }

    pub(crate) fn set_features(&mut self, f: [f64; N_FEATURES]) {
        self.current = f[0];
        self.voltage = f[1];
        self.temperature = f[2];
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub id: String,
    pub ambient_temperature: f64,
    /// Drive profile tag such as `US06`, or `unknown`.
    pub profile: String,
    pub records: Vec<BatteryRecord>,
}

impl Cycle {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Fills `soc = clamp(1 + amp_hours / capacity, 0, 1)` on every record.
pub fn derive_soc(mut cycle: Cycle, nominal_capacity_ah: f64) -> crate::Result<Cycle> {
    if !(nominal_capacity_ah > 0.0) {
        return Err(crate::Error::Config(format!(
            "nominal capacity must be positive, got {nominal_capacity_ah}"
        )));
    }
    for r in &mut cycle.records {
        r.soc = (1.0 + r.amp_hours / nominal_capacity_ah).clamp(0.0, 1.0);
    }
    Ok(cycle)
}
