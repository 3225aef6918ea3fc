use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::checkpoint::Checkpoint;
use super::metrics::{mae, rmse};
use crate::data::WindowSample;
use crate::error::{Error, Result};
use crate::model::{average_horizon, BatchInputs, GiNet};
use crate::tensor::{Mode, ParamStore, Session};

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub cycle_id: String,
    pub t_origin: usize,
    pub horizon: Vec<f64>,
    /// Horizon-averaged prediction.
    pub y_soc_pred: f64,
    /// Horizon-averaged ground truth.
    pub y_soc_true: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mae: f64,
    pub rmse: f64,
    pub n_windows: usize,
    pub config_digest: String,
    pub predictions: Vec<Prediction>,
}

impl EvalReport {
    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        format!(
            "mae={}\nrmse={}\nn_windows={}\nconfig_digest={}\n",
            self.mae, self.rmse, self.n_windows, self.config_digest
        )
    }
}

/// Random stream for the ProbSparse key sampling of one window in eval mode.
/// Depends only on the window, so results do not depend on batching or threads.
pub fn window_seed(seed: u64, window: &WindowSample) -> u64 {
    seed ^ (window.t_origin as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Eval-mode horizon prediction for one window.
pub fn predict_window(model: &GiNet, params: &ParamStore, window: &WindowSample, seed: u64) -> Result<Vec<f64>> {
    let c = &model.config;
    if window.t_in() != c.t_in || window.input.len() != c.t_in * crate::data::N_FEATURES {
        return Err(Error::dim("window", &[window.t_in()], &[c.t_in]));
    }
    let inputs = BatchInputs::from_windows(&[window], c)?;
    let mut s = Session::new(params, Mode::Eval, ChaCha8Rng::seed_from_u64(window_seed(seed, window)));
    let y = model.forward_batch(&mut s, &inputs)?;
    Ok(s.graph.value(y).to_vec())
}

/// Predictions for every window, in window order.
pub fn predict_windows(model: &GiNet, params: &ParamStore, windows: &[WindowSample], seed: u64) -> Result<Vec<Vec<f64>>> {
    windows.par_iter().map(|w| predict_window(model, params, w, seed)).collect()
}

/// Horizon-averaged predictions against horizon-averaged truth.
pub fn evaluate_model(
    model: &GiNet,
    params: &ParamStore,
    windows: &[WindowSample],
    seed: u64,
    config_digest: String,
) -> Result<EvalReport> {
    if windows.is_empty() {
        return Err(Error::Data("no windows to evaluate".into()));
    }
    for w in windows {
        if w.t_out() != model.config.t_out {
            return Err(Error::dim("window target", &[w.t_out()], &[model.config.t_out]));
        }
    }
    let horizons = predict_windows(model, params, windows, seed)?;
    let predictions = windows
        .iter()
        .zip(horizons)
        .map(|(w, horizon)| {
            Ok(Prediction {
                cycle_id: w.cycle_id.clone(),
                t_origin: w.t_origin,
                y_soc_pred: average_horizon(&horizon)?,
                y_soc_true: w.target_mean(),
                horizon,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pred: Vec<f64> = predictions.iter().map(|p| p.y_soc_pred).collect();
    let truth: Vec<f64> = predictions.iter().map(|p| p.y_soc_true).collect();
    Ok(EvalReport {
        mae: mae(&pred, &truth)?,
        rmse: rmse(&pred, &truth)?,
        n_windows: windows.len(),
        config_digest,
        predictions,
    })
}

pub fn evaluate(checkpoint: &Checkpoint, windows: &[WindowSample]) -> Result<EvalReport> {
    evaluate_model(
        &checkpoint.model,
        &checkpoint.params,
        windows,
        checkpoint.train.seed,
        checkpoint.config_digest()?,
    )
}
