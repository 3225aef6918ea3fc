use std::fmt::Write as _;
use std::path::Path;

use ginet_core::complexity::{attention_bench, bench_csv};
use ginet_core::data::{parse_cycle_file, prepare_dir, PreparedDataset, Split, WindowSample};
use ginet_core::digest::sha256_hex;
use ginet_core::model::average_horizon;
use ginet_core::synthetic::{write_synthetic_dataset, SynthConfig};
use ginet_core::train::{evaluate, predict_window, train, training_log_csv, Checkpoint};
use ginet_core::{Error, Result};

use crate::plot::prediction_svg;
use crate::{Command, RunConfig, SharedArgs, SplitArg};

/// First line of every CSV artifact.
pub fn digest_line(digest: &str) -> String {
    format!("# config_digest={digest}\n")
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Prepare {
            raw_dir,
            out_file,
            shared,
        } => prepare(&raw_dir, &out_file, &shared.run_config()?),
        Command::Train {
            dataset,
            out_checkpoint,
            log,
            shared,
        } => {
            let log = log.unwrap_or_else(|| out_checkpoint.with_extension("log.csv"));
            train_cmd(&dataset, &shared.run_config()?, &out_checkpoint, &log)
        }
        Command::Evaluate {
            checkpoint,
            dataset,
            out_dir,
            split,
            shared,
        } => {
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Val => Split::Val,
                SplitArg::Test => Split::Test,
            };
            evaluate_cmd(&checkpoint, &dataset, &out_dir, split, &shared)
        }
        Command::Predict {
            checkpoint,
            input_csv,
            out_csv,
            shared,
        } => predict(&checkpoint, &input_csv, &out_csv, &shared),
        Command::BenchAttention {
            lengths,
            d_model,
            heads,
            sampling_factor,
            out,
            shared,
        } => bench(&lengths, d_model, heads, sampling_factor, &out, &shared.run_config()?),
        Command::Synth {
            out_dir,
            cycles,
            max_seconds,
            shared,
        } => {
            let run = shared.run_config()?;
            let cfg = SynthConfig {
                n_cycles: cycles,
                max_seconds,
                seed: run.train.seed,
                ..SynthConfig::default()
            };
            synth(&out_dir, &cfg)
        }
    }
}

pub fn prepare(raw_dir: &Path, out_file: &Path, run: &RunConfig) -> Result<()> {
    let ds = prepare_dir(raw_dir, &run.prepare)?;
    ds.save(out_file)?;
    println!("train_windows={}", ds.train.len());
    println!("val_windows={}", ds.val.len());
    println!("test_windows={}", ds.test.len());
    println!("config_digest={}", ds.provenance.config_digest);
    Ok(())
}

pub fn train_cmd(dataset: &Path, run: &RunConfig, out_checkpoint: &Path, log_path: &Path) -> Result<()> {
    let ds = PreparedDataset::load(dataset)?;
    let p = &ds.provenance;
    let model = run.model_for_dataset(p.t_in, p.t_out, p.slot_seconds)?;
    log::info!("effective configuration:\n{}", run.to_text());
    let outcome = train(model, ds.norm, &ds.train, &ds.val, &run.train)?;
    let digest = outcome.checkpoint.config_digest()?;
    outcome.checkpoint.save(out_checkpoint)?;
    write(log_path, &(digest_line(&digest) + &training_log_csv(&outcome.log)))?;
    println!("best_val_loss={}", outcome.checkpoint.best_val_loss);
    println!("best_epoch={}", outcome.checkpoint.epoch);
    println!("epochs_run={}", outcome.log.len());
    println!("config_digest={digest}");
    Ok(())
}

/// Explicit window or variant flags must agree with the checkpoint.
fn check_against_checkpoint(ck: &Checkpoint, shared: &SharedArgs) -> Result<()> {
    let run = shared.run_config()?;
    let c = &ck.model.config;
    let checks = [
        ("t_in", run.model.t_in.to_string(), c.t_in.to_string()),
        ("t_out", run.model.t_out.to_string(), c.t_out.to_string()),
        ("variant", run.model.variant.to_string(), c.variant.to_string()),
    ];
    for (key, want, have) in checks {
        if run.is_explicit(key) && want != have {
            return Err(Error::Config(format!("{key}={want} does not match the checkpoint's {key}={have}")));
        }
    }
    Ok(())
}

pub fn evaluate_cmd(checkpoint: &Path, dataset: &Path, out_dir: &Path, split: Split, shared: &SharedArgs) -> Result<()> {
    let ck = Checkpoint::load(checkpoint)?;
    check_against_checkpoint(&ck, shared)?;
    let ds = PreparedDataset::load(dataset)?;
    let c = &ck.model.config;
    let p = &ds.provenance;
    if p.t_in != c.t_in || p.t_out != c.t_out || p.slot_seconds != c.slot_seconds {
        return Err(Error::Config(format!(
            "dataset windows (T_in={}, T_out={}, slot={}s) do not match the checkpoint (T_in={}, T_out={}, slot={}s)",
            p.t_in, p.t_out, p.slot_seconds, c.t_in, c.t_out, c.slot_seconds
        )));
    }
    if ds.norm != ck.norm {
        return Err(Error::Config(
            "dataset was normalised with different statistics than the checkpoint's training data".into(),
        ));
    }
    let report = evaluate(&ck, ds.split(split))?;
    std::fs::create_dir_all(out_dir)?;
    write(&out_dir.join("report.txt"), &report.to_text())?;
    let mut csv = digest_line(&report.config_digest) + "t_origin,y_soc_pred,y_soc_true\n";
    for pr in &report.predictions {
        let _ = writeln!(csv, "{},{},{}", pr.t_origin, pr.y_soc_pred, pr.y_soc_true);
    }
    write(&out_dir.join("predictions.csv"), &csv)?;
    let title = format!("{} on {:?} split: predicted vs true SoC", c.variant, split);
    write(&out_dir.join("plot.svg"), &prediction_svg(&report.predictions, &title, &report.config_digest))?;
    print!("{}", report.to_text());
    Ok(())
}

pub fn predict(checkpoint: &Path, input_csv: &Path, out_csv: &Path, shared: &SharedArgs) -> Result<()> {
    let ck = Checkpoint::load(checkpoint)?;
    check_against_checkpoint(&ck, shared)?;
    let c = &ck.model.config;
    let cycle = parse_cycle_file(input_csv, c.slot_seconds)?;
    if cycle.len() < c.t_in {
        return Err(Error::Data(format!(
            "{} has {} slots, need at least T_in = {}",
            input_csv.display(),
            cycle.len(),
            c.t_in
        )));
    }
    let window = WindowSample {
        cycle_id: cycle.id.clone(),
        t_origin: cycle.len(),
        input: cycle.records[cycle.len() - c.t_in..]
            .iter()
            .flat_map(|r| ck.norm.scale(r.features()))
            .collect(),
        target: Vec::new(),
    };
    let horizon = predict_window(&ck.model, &ck.params, &window, ck.train.seed)?;
    let y_soc = average_horizon(&horizon)?;
    let digest = ck.config_digest()?;
    let mut csv = digest_line(&digest) + "t_origin,y_soc_pred";
    for h in 1..=horizon.len() {
        let _ = write!(csv, ",y_{h}");
    }
    let _ = write!(csv, "\n{},{}", window.t_origin, y_soc);
    for v in &horizon {
        let _ = write!(csv, ",{v}");
    }
    csv.push('\n');
    write(out_csv, &csv)?;
    println!("y_soc_pred={y_soc}");
    Ok(())
}

pub fn bench(
    lengths: &[usize],
    d_model: usize,
    heads: usize,
    sampling_factor: usize,
    out: &Path,
    run: &RunConfig,
) -> Result<()> {
    if lengths.len() < 2 {
        return Err(Error::Config(format!(
            "bench-attention needs at least two lengths to form ratios, got {lengths:?}"
        )));
    }
    let seed = run.train.seed;
    let settings = format!(
        "lengths={lengths:?}\nd_model={d_model}\nheads={heads}\nsampling_factor={sampling_factor}\nseed={seed}\n"
    );
    let rows = attention_bench(lengths, d_model, heads, sampling_factor, seed)?;
    let csv = bench_csv(&rows);
    write(out, &(digest_line(&sha256_hex(settings.as_bytes())) + &csv))?;
    print!("{csv}");
    for pair in rows.windows(2) {
        println!(
            "L {} -> {}: full_ops x{:.3}, probsparse_ops x{:.3}",
            pair[0].len,
            pair[1].len,
            pair[1].full_ops as f64 / pair[0].full_ops as f64,
            pair[1].probsparse_ops as f64 / pair[0].probsparse_ops as f64
        );
    }
    Ok(())
}

pub fn synth(out_dir: &Path, cfg: &SynthConfig) -> Result<()> {
    let paths = write_synthetic_dataset(out_dir, cfg)?;
    let settings = synth_settings_text(cfg);
    write(
        &out_dir.join("synth_config.txt"),
        &format!("config_digest={}\n{settings}", sha256_hex(settings.as_bytes())),
    )?;
    println!("wrote {} cycles to {}", paths.len(), out_dir.display());
    Ok(())
}

fn synth_settings_text(cfg: &SynthConfig) -> String {
    format!(
        "n_cycles={}\nsample_seconds={}\nmax_seconds={}\ncapacity_ah={}\nmean_current={}\nmin_soc={}\nseed={}\n",
        cfg.n_cycles, cfg.sample_seconds, cfg.max_seconds, cfg.capacity_ah, cfg.mean_current, cfg.min_soc, cfg.seed
    )
}
