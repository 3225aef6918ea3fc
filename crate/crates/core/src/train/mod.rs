//! Mini-batch training with Adam, per-epoch learning-rate decay, early
//! stopping on validation loss, checkpointing and evaluation.

mod adam;
mod checkpoint;
mod eval;
mod metrics;

pub use adam::Adam;
pub use checkpoint::{config_digest, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use eval::{evaluate, evaluate_model, predict_window, predict_windows, window_seed, EvalReport, Prediction};
pub use metrics::{mae, mse, mse_loss, rmse};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{NormStats, WindowSample};
use crate::error::{Error, Result};
use crate::model::{BatchInputs, GiNet, GiNetConfig};
use crate::tensor::{Mode, ParamStore, Session};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Multiplier applied per epoch when `scheduler` is on.
    pub lr_decay: f64,
    pub scheduler: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            lr: 1e-4,
            max_epochs: 20,
            patience: 3,
            lr_decay: 0.5,
            scheduler: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config(format!(
                "batch_size, max_epochs and patience must be positive: {self:?}"
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!("lr_decay must be in (0, 1], got {}", self.lr_decay)));
        }
        Ok(())
    }

    /// Learning rate for 1-based `epoch`: `lr * lr_decay^(epoch - 1)`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if self.scheduler {
            self.lr * self.lr_decay.powi(epoch.saturating_sub(1) as i32)
        } else {
            self.lr
        }
    }
}

/// Stops after `patience` consecutive epochs without a new best validation loss.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    bad_epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    pub fn update(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            StopDecision::Improved
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

/// `epoch,train_loss,val_loss,lr` with a header row.
pub fn training_log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,lr\n");
    for e in log {
        out.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_loss, e.val_loss, e.lr));
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    pub stopped_early: bool,
}

/// Full-horizon MSE of eval-mode predictions.
pub fn validation_loss(model: &GiNet, params: &ParamStore, windows: &[WindowSample], seed: u64) -> Result<f64> {
    let preds = predict_windows(model, params, windows, seed)?;
    let pred: Vec<f64> = preds.into_iter().flatten().collect();
    let truth: Vec<f64> = windows.iter().flat_map(|w| w.target.iter().copied()).collect();
    mse(&pred, &truth)
}

/// Trains a freshly initialised model and returns the best-validation checkpoint.
pub fn train(
    config: GiNetConfig,
    norm: NormStats,
    train_windows: &[WindowSample],
    val_windows: &[WindowSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_windows.is_empty() || val_windows.is_empty() {
        return Err(Error::Data(format!(
            "training needs non-empty splits (train {}, val {})",
            train_windows.len(),
            val_windows.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ParamStore::new();
    let model = GiNet::new(config, &mut params, &mut rng)?;
    let mut adam = Adam::new(&params);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = params.clone();
    let mut log = Vec::new();
    let mut order: Vec<usize> = (0..train_windows.len()).collect();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let windows: Vec<&WindowSample> = chunk.iter().map(|&i| &train_windows[i]).collect();
            let inputs = BatchInputs::from_windows(&windows, &model.config)?;
            let target: Vec<f64> = windows.iter().flat_map(|w| w.target.iter().copied()).collect();
            let mut s = Session::new(&params, Mode::Train, ChaCha8Rng::seed_from_u64(rng.random()));
            let pred = model.forward_batch(&mut s, &inputs)?;
            let loss = mse_loss(&mut s.graph, pred, &target)?;
            let value = s.graph.value(loss)[0];
            if !value.is_finite() {
                return Err(Error::Divergence(format!("training loss is {value} at epoch {epoch}, batch {}", b + 1)));
            }
            s.backward(loss)?;
            let grads = s.param_grads();
            drop(s);
            adam.step(&mut params, &grads, lr)?;
            total += value * chunk.len() as f64;
        }
        let train_loss = total / train_windows.len() as f64;
        let val_loss = validation_loss(&model, &params, val_windows, cfg.seed)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence(format!("validation loss is {val_loss} at epoch {epoch}")));
        }
        log::info!("epoch {epoch}: train {train_loss:.6e} val {val_loss:.6e} lr {lr:.3e}");
        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            lr,
        });
        match stopper.update(epoch, val_loss) {
            StopDecision::Improved => best.copy_values_from(&params)?,
            StopDecision::Continue => {}
            StopDecision::Stop => {
                stopped_early = epoch < cfg.max_epochs;
                break;
            }
        }
    }

    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            model,
            params: best,
            train: cfg.clone(),
            norm,
            best_val_loss: stopper.best,
            epoch: stopper.best_epoch,
        },
        log,
        stopped_early,
    })
}
