use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    apply_normalize, derive_soc, fit_normalize, make_windows, parse_dataset, split_cycles, split_cycles_with_test,
    Cycle, CycleInfo, PreparedDataset, Provenance, Split, WindowSample, DEFAULT_CAPACITY_AH, DEFAULT_RATIO,
};
use crate::digest::digest_of;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareSettings {
    pub t_in: usize,
    pub t_out: usize,
    pub stride: usize,
    pub slot_seconds: f64,
    pub nominal_capacity_ah: f64,
    pub seed: u64,
    pub ratio: [usize; 3],
    /// Cycles forced into the test split; empty means a seeded random split.
    pub test_ids: Vec<String>,
}

impl Default for PrepareSettings {
    fn default() -> Self {
        PrepareSettings {
            t_in: 100,
            t_out: 10,
            stride: 1,
            slot_seconds: 1.0,
            nominal_capacity_ah: DEFAULT_CAPACITY_AH,
            seed: 0,
            ratio: DEFAULT_RATIO,
            test_ids: Vec::new(),
        }
    }
}

impl PrepareSettings {
    pub fn validate(&self) -> Result<()> {
        if self.t_in == 0 || self.t_out == 0 || self.stride == 0 {
            return Err(Error::Config(format!(
                "t_in, t_out and stride must be positive: {} {} {}",
                self.t_in, self.t_out, self.stride
            )));
        }
        if !(self.slot_seconds > 0.0) || !(self.nominal_capacity_ah > 0.0) {
            return Err(Error::Config("slot_seconds and nominal capacity must be positive".into()));
        }
        Ok(())
    }
}

/// Parses every cycle file in `dir` and prepares windows from them.
pub fn prepare_dir(dir: &Path, settings: &PrepareSettings) -> Result<PreparedDataset> {
    settings.validate()?;
    let cycles = parse_dataset(dir, settings.slot_seconds)?;
    let files = cycles.iter().map(|c| format!("{}.csv", c.id)).collect();
    prepare_cycles(cycles, settings, dir.display().to_string(), files)
}

/// SoC labelling, cycle-level split, train-fitted normalisation and windowing.
pub fn prepare_cycles(
    cycles: Vec<Cycle>,
    settings: &PrepareSettings,
    source: String,
    files: Vec<String>,
) -> Result<PreparedDataset> {
    settings.validate()?;
    if cycles.len() < 3 {
        return Err(Error::Data(format!(
            "need at least 3 cycles for a train/validation/test split, found {}",
            cycles.len()
        )));
    }
    let cycles = cycles
        .into_iter()
        .map(|c| derive_soc(c, settings.nominal_capacity_ah))
        .collect::<Result<Vec<_>>>()?;
    let (train, val, test) = if settings.test_ids.is_empty() {
        split_cycles(&cycles, settings.ratio, settings.seed)?
    } else {
        split_cycles_with_test(&cycles, settings.ratio, settings.seed, &settings.test_ids)?
    };
    let norm = fit_normalize(&train)?;

    let mut infos = Vec::new();
    let mut windows = |part: &[Cycle], split: Split| -> Vec<WindowSample> {
        let part = apply_normalize(&norm, part);
        let mut out = Vec::new();
        for c in &part {
            infos.push(CycleInfo {
                id: c.id.clone(),
                split,
                profile: c.profile.clone(),
                ambient_temperature: c.ambient_temperature,
                n_slots: c.len(),
            });
            out.extend(make_windows(c, settings.t_in, settings.t_out, settings.stride));
        }
        out
    };
    let train_w = windows(&train, Split::Train);
    let val_w = windows(&val, Split::Val);
    let test_w = windows(&test, Split::Test);
    infos.sort_by(|a, b| a.id.cmp(&b.id));
    for (name, w) in [("train", &train_w), ("validation", &val_w), ("test", &test_w)] {
        if w.is_empty() {
            return Err(Error::Data(format!(
                "{name} split has no windows: cycles shorter than T_in + T_out = {}",
                settings.t_in + settings.t_out
            )));
        }
    }
    Ok(PreparedDataset {
        provenance: Provenance {
            source,
            files,
            t_in: settings.t_in,
            t_out: settings.t_out,
            stride: settings.stride,
            slot_seconds: settings.slot_seconds,
            nominal_capacity_ah: settings.nominal_capacity_ah,
            seed: settings.seed,
            ratio: settings.ratio,
            config_digest: digest_of(settings)?,
        },
        norm,
        cycles: infos,
        train: train_w,
        val: val_w,
        test: test_w,
    })
}
