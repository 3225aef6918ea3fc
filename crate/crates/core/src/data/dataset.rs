//! Prepared-dataset container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic     8 bytes   "GINETDS\0"
//! version   u32       DATASET_VERSION
//! meta_len  u64       byte length of the JSON block
//! meta      JSON      { provenance, norm, cycles, counts }
//! windows   train, then val, then test; each window is
//!           cycle_index u32 | t_origin u64 | input f64 x (T_in*3) | target f64 x T_out
//! ```
//!
//! The JSON block is written with a fixed field order, so identical inputs
//! give byte-identical files.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NormStats, WindowSample, N_FEATURES};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 8] = b"GINETDS\0";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub files: Vec<String>,
    pub t_in: usize,
    pub t_out: usize,
    pub stride: usize,
    pub slot_seconds: f64,
    pub nominal_capacity_ah: f64,
    pub seed: u64,
    pub ratio: [usize; 3],
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleInfo {
    pub id: String,
    pub split: Split,
    pub profile: String,
    pub ambient_temperature: f64,
    pub n_slots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Meta {
    provenance: Provenance,
    norm: NormStats,
    cycles: Vec<CycleInfo>,
    counts: [usize; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDataset {
    pub provenance: Provenance,
    pub norm: NormStats,
    pub cycles: Vec<CycleInfo>,
    pub train: Vec<WindowSample>,
    pub val: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
}

impl PreparedDataset {
    pub fn split(&self, which: Split) -> &[WindowSample] {
        match which {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn cycles_in(&self, which: Split) -> impl Iterator<Item = &CycleInfo> {
        self.cycles.iter().filter(move |c| c.split == which)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = Meta {
            provenance: self.provenance.clone(),
            norm: self.norm,
            cycles: self.cycles.clone(),
            counts: [self.train.len(), self.val.len(), self.test.len()],
        };
        let json = serde_json::to_vec(&meta).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        let (t_in, t_out) = (self.provenance.t_in, self.provenance.t_out);
        for w in self.train.iter().chain(&self.val).chain(&self.test) {
            if w.input.len() != t_in * N_FEATURES || w.target.len() != t_out {
                return Err(Error::Format(format!("window at t={} has inconsistent length", w.t_origin)));
            }
            let idx = self
                .cycles
                .iter()
                .position(|c| c.id == w.cycle_id)
                .ok_or_else(|| Error::Format(format!("window references unknown cycle {}", w.cycle_id)))?;
            out.extend_from_slice(&(idx as u32).to_le_bytes());
            out.extend_from_slice(&(w.t_origin as u64).to_le_bytes());
            for v in w.input.iter().chain(&w.target) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated header".into()))?;
        if &magic != DATASET_MAGIC {
            return Err(Error::Format("not a prepared dataset file (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let meta_len = read_u64(&mut r)? as usize;
        if r.len() < meta_len {
            return Err(Error::Format("truncated metadata".into()));
        }
        let meta: Meta = serde_json::from_slice(&r[..meta_len]).map_err(|e| Error::Format(e.to_string()))?;
        r = &r[meta_len..];
        let (t_in, t_out) = (meta.provenance.t_in, meta.provenance.t_out);
        let mut read_split = |n: usize| -> Result<Vec<WindowSample>> {
            (0..n)
                .map(|_| {
                    let idx = read_u32(&mut r)? as usize;
                    let t_origin = read_u64(&mut r)? as usize;
                    let input = (0..t_in * N_FEATURES).map(|_| read_f64(&mut r)).collect::<Result<_>>()?;
                    let target = (0..t_out).map(|_| read_f64(&mut r)).collect::<Result<_>>()?;
                    let cycle_id = meta
                        .cycles
                        .get(idx)
                        .ok_or_else(|| Error::Format(format!("cycle index {idx} out of range")))?
                        .id
                        .clone();
                    Ok(WindowSample {
                        cycle_id,
                        t_origin,
                        input,
                        target,
                    })
                })
                .collect()
        };
        let train = read_split(meta.counts[0])?;
        let val = read_split(meta.counts[1])?;
        let test = read_split(meta.counts[2])?;
        if !r.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", r.len())));
        }
        Ok(PreparedDataset {
            provenance: meta.provenance,
            norm: meta.norm,
            cycles: meta.cycles,
            train,
            val,
            test,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::File::create(path)?.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

pub(crate) fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| Error::Format("unexpected end of file".into()))?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64(r: &mut &[u8]) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| Error::Format("unexpected end of file".into()))?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64(r: &mut &[u8]) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PreparedDataset {
        let w = |id: &str, t: usize| WindowSample {
            cycle_id: id.into(),
            t_origin: t,
            input: (0..6).map(|i| i as f64 * 0.1 + t as f64).collect(),
            target: vec![0.9, 0.8],
        };
        PreparedDataset {
            provenance: Provenance {
                source: "raw".into(),
                files: vec!["a.csv".into(), "b.csv".into()],
                t_in: 2,
                t_out: 2,
                stride: 1,
                slot_seconds: 1.0,
                nominal_capacity_ah: 2.9,
                seed: 3,
                ratio: [10, 2, 5],
                config_digest: "abc".into(),
            },
            norm: NormStats {
                min: [-1.0, 3.0, 0.1],
                max: [0.3, 4.2, 40.0 / 3.0],
            },
            cycles: vec![
                CycleInfo {
                    id: "a".into(),
                    split: Split::Train,
                    profile: "US06".into(),
                    ambient_temperature: 25.0,
                    n_slots: 9,
                },
                CycleInfo {
                    id: "b".into(),
                    split: Split::Test,
                    profile: "UDDS".into(),
                    ambient_temperature: -10.0,
                    n_slots: 5,
                },
            ],
            train: vec![w("a", 2), w("a", 3)],
            val: vec![],
            test: vec![w("b", 2)],
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let d = sample();
        let bytes = d.to_bytes().unwrap();
        assert_eq!(&bytes[..8], DATASET_MAGIC);
        let back = PreparedDataset::from_bytes(&bytes).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = sample().to_bytes().unwrap();
        assert!(PreparedDataset::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(PreparedDataset::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(PreparedDataset::from_bytes(&extra).is_err());
    }
}
