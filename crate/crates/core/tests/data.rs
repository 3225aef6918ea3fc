use std::collections::BTreeSet;

use ginet_core::data::{
    make_windows, parse_dataset, prepare_dir, window_count, BatteryRecord, Cycle, PrepareSettings, Split,
};
use ginet_core::synthetic::{write_synthetic_dataset, SynthConfig};
use proptest::prelude::*;

fn synth_dir(n_cycles: usize, seed: u64) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        n_cycles,
        max_seconds: 900.0,
        seed,
        ..SynthConfig::default()
    };
    write_synthetic_dataset(dir.path(), &cfg).unwrap();
    dir
}

fn settings() -> PrepareSettings {
    PrepareSettings {
        t_in: 20,
        t_out: 5,
        stride: 7,
        seed: 3,
        ..PrepareSettings::default()
    }
}

fn indexed_cycle(len: usize) -> Cycle {
    Cycle {
        id: "c".into(),
        ambient_temperature: 25.0,
        profile: "unknown".into(),
        records: (0..len)
            .map(|i| BatteryRecord {
                timestamp: i as f64,
                current: i as f64,
                voltage: i as f64,
                temperature: i as f64,
                amp_hours: 0.0,
                soc: i as f64,
            })
            .collect(),
    }
}

#[test]
fn window_count_matches_enumeration() {
    for len in 0..=20 {
        for t_in in 1..=8 {
            for t_out in 1..=8 {
                for stride in 1..=3 {
                    // every origin t with a full input block behind it and a full horizon ahead
                    let origins: Vec<usize> = (t_in..=len)
                        .filter(|t| t + t_out <= len && (t - t_in) % stride == 0)
                        .collect();
                    assert_eq!(window_count(len, t_in, t_out, stride), origins.len(), "{len} {t_in} {t_out} {stride}");
                    let windows = make_windows(&indexed_cycle(len), t_in, t_out, stride);
                    let got: Vec<usize> = windows.iter().map(|w| w.t_origin).collect();
                    assert_eq!(got, origins);
                    for w in &windows {
                        let first_input = w.input[0] as usize;
                        assert_eq!(first_input, w.t_origin - t_in);
                        assert_eq!(w.target, (w.t_origin..w.t_origin + t_out).map(|i| i as f64).collect::<Vec<_>>());
                    }
                }
            }
        }
    }
}

#[test]
fn no_cycle_leaks_across_splits() {
    let dir = synth_dir(17, 5);
    let ds = prepare_dir(dir.path(), &settings()).unwrap();
    let ids = |s: Split| ds.cycles_in(s).map(|c| c.id.clone()).collect::<BTreeSet<_>>();
    let (train, val, test) = (ids(Split::Train), ids(Split::Val), ids(Split::Test));
    assert_eq!((train.len(), val.len(), test.len()), (10, 2, 5));
    assert!(train.is_disjoint(&val) && train.is_disjoint(&test) && val.is_disjoint(&test));
    for (split, set) in [(Split::Train, &train), (Split::Val, &val), (Split::Test, &test)] {
        assert!(!ds.split(split).is_empty());
        assert!(ds.split(split).iter().all(|w| set.contains(&w.cycle_id)));
    }
}

#[test]
fn normalisation_is_fitted_on_training_cycles_only() {
    let dir = synth_dir(9, 8);
    let ds = prepare_dir(dir.path(), &settings()).unwrap();
    let raw = parse_dataset(dir.path(), 1.0).unwrap();
    let train_ids: BTreeSet<_> = ds.cycles_in(Split::Train).map(|c| c.id.clone()).collect();
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for c in raw.iter().filter(|c| train_ids.contains(&c.id)) {
        for r in &c.records {
            for (i, v) in r.features().into_iter().enumerate() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
    }
    assert_eq!(ds.norm.min, min);
    assert_eq!(ds.norm.max, max);
    for w in &ds.train {
        assert!(w.input.iter().all(|v| (0.0..=1.0).contains(v)));
    }
    for w in ds.train.iter().chain(&ds.val).chain(&ds.test) {
        assert!(w.target.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn prepared_dataset_bytes_are_reproducible() {
    let a = synth_dir(6, 1);
    let b = synth_dir(6, 1);
    for entry in std::fs::read_dir(a.path()).unwrap() {
        let path = entry.unwrap().path();
        let twin = b.path().join(path.file_name().unwrap());
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(twin).unwrap());
    }
    let first = prepare_dir(a.path(), &settings()).unwrap().to_bytes().unwrap();
    let second = prepare_dir(a.path(), &settings()).unwrap().to_bytes().unwrap();
    assert_eq!(first, second);

    let other_seed = PrepareSettings { seed: 4, ..settings() };
    assert_ne!(prepare_dir(a.path(), &other_seed).unwrap().to_bytes().unwrap(), first);
}

#[test]
fn too_few_cycles_is_a_data_error() {
    let dir = synth_dir(2, 0);
    assert!(matches!(prepare_dir(dir.path(), &settings()), Err(ginet_core::Error::Data(_))));
    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(prepare_dir(empty.path(), &settings()), Err(ginet_core::Error::Data(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn windows_stay_inside_their_cycle(len in 0usize..60, t_in in 1usize..10, t_out in 1usize..10, stride in 1usize..5) {
        let windows = make_windows(&indexed_cycle(len), t_in, t_out, stride);
        prop_assert_eq!(windows.len(), window_count(len, t_in, t_out, stride));
        for w in &windows {
            prop_assert_eq!(w.t_in(), t_in);
            prop_assert_eq!(w.t_out(), t_out);
            prop_assert!(w.t_origin + t_out <= len);
            // the last input slot is t_origin - 1 and the first target slot is t_origin
            prop_assert_eq!(w.input[w.input.len() - 1] as usize, w.t_origin - 1);
            prop_assert_eq!(w.target[0] as usize, w.t_origin);
        }
    }
}
