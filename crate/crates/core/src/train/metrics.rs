use crate::error::{Error, Result};
use crate::tensor::{Graph, Var};

/// Mean squared error between `pred` and a constant target of the same shape.
pub fn mse_loss(g: &mut Graph, pred: Var, target: &[f64]) -> Result<Var> {
    let shape = g.shape(pred).to_vec();
    if g.value(pred).len() != target.len() {
        return Err(Error::dim("mse_loss", &shape, &[target.len()]));
    }
    let t = g.constant(&shape, target.to_vec())?;
    let diff = g.sub(pred, t)?;
    let sq = g.mul(diff, diff)?;
    Ok(g.mean(sq))
}

fn check(pred: &[f64], truth: &[f64], what: &'static str) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::dim(what, &[pred.len()], &[truth.len()]));
    }
    if pred.is_empty() {
        return Err(Error::Contract(format!("{what} of empty vectors")));
    }
    Ok(())
}

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth, "mse")?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth, "mae")?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth, "rmse")?;
    Ok(mse(pred, truth)?.sqrt())
}
