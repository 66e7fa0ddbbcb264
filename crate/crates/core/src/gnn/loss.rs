use crate::error::{Error, Result};

fn check(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Shape("empty loss input".into()));
    }
    Ok(())
}

/// Mean Huber loss: `r^2 / 2` inside `|r| <= delta`, `delta (|r| - delta/2)`
/// outside.
pub fn huber_loss(pred: &[f64], target: &[f64], delta: f64) -> Result<f64> {
    check(pred, target)?;
    let total: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let r = (p - t).abs();
            if r <= delta {
                0.5 * r * r
            } else {
                delta * (r - 0.5 * delta)
            }
        })
        .sum();
    let loss = total / pred.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("huber loss".into()));
    }
    Ok(loss)
}

/// Derivative of [`huber_loss`] with respect to each prediction.
pub fn huber_grad(pred: &[f64], target: &[f64], delta: f64) -> Result<Vec<f64>> {
    check(pred, target)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).clamp(-delta, delta) / n)
        .collect())
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check(pred, target)?;
    let mse = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(mse.sqrt())
}
