//! Command-line front end: prepare, train, evaluate, predict, bench-attention, synth.
//!
//! Exit codes: 0 success, 2 configuration or parse error, 3 insufficient data,
//! 4 numeric failure.

pub mod commands;
pub mod config;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ginet_core::Error;

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Data(_) => EXIT_DATA,
        Error::Divergence(_) => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

#[derive(Debug, Parser)]
#[command(name = "ginet", version, about = "GRU-enhanced Informer for battery state-of-charge forecasting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Ginet,
    Informer,
    Gru,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AttentionArg {
    Probsparse,
    Full,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

/// Flags shared by every command. Applied after `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct SharedArgs {
    /// Plain `key=value` config file; `#` starts a comment.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "t-in")]
    pub t_in: Option<usize>,
    #[arg(long = "t-out")]
    pub t_out: Option<usize>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    pub attention: Option<AttentionArg>,
    #[arg(long, value_enum)]
    pub distill: Option<OnOff>,
    #[arg(long = "e-layers")]
    pub e_layers: Option<usize>,
    #[arg(long = "d-layers")]
    pub d_layers: Option<usize>,
    /// Any config key, e.g. `--set lr=0.001`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse raw cycle CSVs into a windowed, normalised dataset file.
    Prepare {
        raw_dir: PathBuf,
        out_file: PathBuf,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Train a model; writes a checkpoint and a training-log CSV.
    Train {
        dataset: PathBuf,
        out_checkpoint: PathBuf,
        /// Training log path; defaults to the checkpoint path with `.log.csv`.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Evaluate a checkpoint; writes report.txt, predictions.csv and plot.svg.
    Evaluate {
        checkpoint: PathBuf,
        dataset: PathBuf,
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Forecast the horizon after the last `T_in` slots of a raw cycle CSV.
    Predict {
        checkpoint: PathBuf,
        input_csv: PathBuf,
        out_csv: PathBuf,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Count operations and time full against ProbSparse attention.
    BenchAttention {
        /// Comma-separated sequence lengths, at least two.
        #[arg(long, value_delimiter = ',', default_value = "256,512,1024,2048")]
        lengths: Vec<usize>,
        #[arg(long = "d-model", default_value_t = 64)]
        d_model: usize,
        #[arg(long, default_value_t = 8)]
        heads: usize,
        #[arg(long = "sampling-factor", default_value_t = 5)]
        sampling_factor: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Write synthetic discharge cycles in the raw CSV layout.
    Synth {
        out_dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        cycles: usize,
        #[arg(long = "max-seconds", default_value_t = 3600.0)]
        max_seconds: f64,
        #[command(flatten)]
        shared: SharedArgs,
    },
}

impl SharedArgs {
    /// Defaults, then the config file, then the flags.
    pub fn run_config(&self) -> ginet_core::Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(path) = &self.config {
            c.apply_file(path)?;
        }
        if let Some(v) = self.seed {
            c.set("seed", &v.to_string())?;
        }
        if let Some(v) = self.t_in {
            c.set("t_in", &v.to_string())?;
        }
        if let Some(v) = self.t_out {
            c.set("t_out", &v.to_string())?;
        }
        if let Some(v) = self.variant {
            let name = match v {
                VariantArg::Ginet => "ginet",
                VariantArg::Informer => "informer",
                VariantArg::Gru => "gru",
            };
            c.set("variant", name)?;
        }
        if let Some(v) = self.attention {
            c.set("attention", if matches!(v, AttentionArg::Full) { "full" } else { "probsparse" })?;
        }
        if let Some(v) = self.distill {
            c.set("distill", if matches!(v, OnOff::On) { "on" } else { "off" })?;
        }
        if let Some(v) = self.e_layers {
            c.set("e_layers", &v.to_string())?;
        }
        if let Some(v) = self.d_layers {
            c.set("d_layers", &v.to_string())?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            c.set(k, v)?;
        }
        Ok(c)
    }
}

/// Caps the global worker pool when `GINET_THREADS` is set. Only the first call has an effect.
pub fn init_threads() {
    if let Some(n) = std::env::var("GINET_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    init_threads();
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
