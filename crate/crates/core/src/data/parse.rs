use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{BatteryRecord, Cycle};
use crate::error::{Error, Result};

/// Header columns every cycle CSV must provide.
pub const REQUIRED_COLUMNS: [&str; 5] = [
    "timestamp_s",
    "voltage_V",
    "current_A",
    "temperature_C",
    "amp_hours_Ah",
];

const KNOWN_PROFILES: [&str; 8] = ["US06", "HWFET", "UDDS", "LA92", "NN", "MIXED", "CYCLE", "SYNTH"];

/// Parses every `*.csv` in `dir` (one cycle per file), sorted by cycle id.
pub fn parse_dataset(dir: &Path, slot_seconds: f64) -> Result<Vec<Cycle>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    let mut cycles = files
        .par_iter()
        .map(|p| parse_cycle_file(p, slot_seconds))
        .collect::<Result<Vec<_>>>()?;
    cycles.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(cycles)
}

/// Reads one raw cycle and averages rows into `slot_seconds`-wide slots.
pub fn parse_cycle_file(path: &Path, slot_seconds: f64) -> Result<Cycle> {
    if !(slot_seconds > 0.0) {
        return Err(Error::Config(format!("slot_seconds must be positive, got {slot_seconds}")));
    }
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    let mut cols = [0usize; 5];
    for (slot, name) in cols.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(format!("missing column \"{name}\"")))?;
    }

    let mut rows: Vec<[f64; 5]> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let mut row = [0.0; 5];
        for (v, (&c, name)) in row.iter_mut().zip(cols.iter().zip(REQUIRED_COLUMNS)) {
            let field = rec.get(c).unwrap_or("");
            *v = field
                .parse()
                .map_err(|_| parse_err(format!("row {}: bad {name} value {field:?}", line + 2)))?;
        }
        if let Some(prev) = rows.last() {
            if row[0] <= prev[0] {
                return Err(Error::Data(format!(
                    "{}: timestamps not strictly increasing at row {} ({} after {})",
                    path.display(),
                    line + 2,
                    row[0],
                    prev[0]
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }

    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let records = aggregate(&rows, slot_seconds);
    let ambient_temperature = ambient_from_name(&id).unwrap_or(records[0].temperature);
    Ok(Cycle {
        profile: profile_from_name(&id),
        id,
        ambient_temperature,
        records,
    })
}

fn aggregate(rows: &[[f64; 5]], slot_seconds: f64) -> Vec<BatteryRecord> {
    let t0 = rows[0][0];
    // small epsilon keeps rows that sit exactly on a slot boundary in that slot
    let slot_of = |t: f64| ((t - t0) / slot_seconds + 1e-9).floor() as i64;
    let mut out = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let slot = slot_of(rows[start][0]);
        let mut end = start + 1;
        while end < rows.len() && slot_of(rows[end][0]) == slot {
            end += 1;
        }
        let n = (end - start) as f64;
        let mut mean = [0.0; 5];
        for row in &rows[start..end] {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        out.push(BatteryRecord {
            timestamp: mean[0],
            voltage: mean[1],
            current: mean[2],
            temperature: mean[3],
            amp_hours: mean[4],
            soc: f64::NAN,
        });
        start = end;
    }
    out
}

fn tokens(id: &str) -> impl Iterator<Item = &str> {
    id.split(['_', '-', ' ', '.']).filter(|t| !t.is_empty())
}

fn profile_from_name(id: &str) -> String {
    tokens(id)
        .map(str::to_ascii_uppercase)
        .find(|t| KNOWN_PROFILES.iter().any(|p| t.starts_with(p)))
        .unwrap_or_else(|| "unknown".to_string())
}

/// Reads a `25degC` / `n10degC` / `-10C` style token from the file stem.
fn ambient_from_name(id: &str) -> Option<f64> {
    let lower = id.to_ascii_lowercase();
    for tok in lower.split(['_', ' ']) {
        let Some(body) = tok.strip_suffix("degc").or_else(|| tok.strip_suffix('c')) else {
            continue;
        };
        let (sign, digits) = match body.strip_prefix('n').or_else(|| body.strip_prefix('-')) {
            Some(rest) => (-1.0, rest),
            None => (1.0, body),
        };
        if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) {
            return digits.parse::<f64>().ok().map(|v| sign * v);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        let mut f = std::fs::File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    const HEADER: &str = "timestamp_s,voltage_V,current_A,temperature_C,amp_hours_Ah\n";

    #[test]
    fn rows_matching_slot_width_pass_through() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{HEADER}0,4.1,-1,25,0\n1,4.0,-1.5,25.5,-0.001\n2,3.9,-2,26,-0.002\n");
        let c = parse_cycle_file(&write_csv(dir.path(), "a.csv", &body), 1.0).unwrap();
        assert_eq!(c.records.len(), 3);
        assert_eq!(c.records[1].voltage, 4.0);
        assert_eq!(c.records[2].current, -2.0);
    }

    #[test]
    fn ten_hertz_rows_average_into_one_second_slots() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = HEADER.to_string();
        let mut volts = Vec::new();
        for i in 0..20 {
            let v = 4.0 - 0.01 * i as f64;
            volts.push(v);
            body.push_str(&format!("{},{v},{},25,{}\n", i as f64 * 0.1, -(i as f64), -0.0001 * i as f64));
        }
        let c = parse_cycle_file(&write_csv(dir.path(), "b.csv", &body), 1.0).unwrap();
        assert_eq!(c.records.len(), 2);
        // hand-computed oracle: mean of each block of ten rows
        let first: f64 = volts[..10].iter().sum::<f64>() / 10.0;
        let second: f64 = volts[10..].iter().sum::<f64>() / 10.0;
        assert!((c.records[0].voltage - first).abs() < 1e-12);
        assert!((c.records[1].voltage - second).abs() < 1e-12);
        assert!((c.records[0].current - (-4.5)).abs() < 1e-12);
        assert!((c.records[1].current - (-14.5)).abs() < 1e-12);
        assert!((c.records[0].timestamp - 0.45).abs() < 1e-12);
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let body = "timestamp_s,current_A,temperature_C,amp_hours_Ah\n0,-1,25,0\n";
        let err = parse_cycle_file(&write_csv(dir.path(), "c.csv", body), 1.0).unwrap_err();
        match err {
            Error::Parse { message, .. } => assert!(message.contains("voltage_V"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_monotonic_timestamps_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{HEADER}0,4,-1,25,0\n2,4,-1,25,0\n1,4,-1,25,0\n");
        let err = parse_cycle_file(&write_csv(dir.path(), "d.csv", &body), 1.0).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn directory_parse_is_sorted_by_id() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{HEADER}0,4,-1,25,0\n1,4,-1,25,0\n");
        write_csv(dir.path(), "z_US06.csv", &body);
        write_csv(dir.path(), "a_n10degC_HWFET.csv", &body);
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let cycles = parse_dataset(dir.path(), 1.0).unwrap();
        let ids: Vec<&str> = cycles.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["a_n10degC_HWFET", "z_US06"]);
        assert_eq!(cycles[0].ambient_temperature, -10.0);
        assert_eq!(cycles[0].profile, "HWFET");
        assert_eq!(cycles[1].profile, "US06");
    }
}
