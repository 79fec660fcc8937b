//! Head losses and their gradients with respect to the head's pre-activations.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + eˣ)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Row-wise softmax, shifted by the row maximum.
pub fn softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}

fn check_labels(probs: ArrayView2<f64>, labels: &[usize]) -> Result<()> {
    if probs.nrows() != labels.len() {
        return Err(Error::shape("labels", probs.nrows(), labels.len()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= probs.ncols()) {
        return Err(Error::Argument(format!(
            "label {l} out of range for {} classes",
            probs.ncols()
        )));
    }
    Ok(())
}

/// Mean negative log-likelihood of the true classes.
pub fn nll_loss(probs: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
    check_labels(probs, labels)?;
    if labels.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs[[i, y]].max(f64::MIN_POSITIVE).ln())
        .sum();
    Ok(total / labels.len() as f64)
}

/// Gradient of [`nll_loss`] of `softmax(logits)` with respect to the logits:
/// `(p − onehot(y)) / n`.
pub fn nll_logit_gradient(probs: ArrayView2<f64>, labels: &[usize]) -> Result<Array2<f64>> {
    check_labels(probs, labels)?;
    let n = labels.len() as f64;
    let mut g = probs.to_owned();
    for (i, &y) in labels.iter().enumerate() {
        g[[i, y]] -= 1.0;
    }
    g.mapv_inplace(|v| v / n);
    Ok(g)
}

/// Squared error averaged over every output of every observation.
pub fn mse_loss(pred: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<f64> {
    check_same(pred, targets)?;
    if pred.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let sum: f64 = pred.iter().zip(targets.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / pred.len() as f64)
}

/// `2 (ŷ − y) / N` with `N` the element count.
pub fn mse_gradient(pred: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_same(pred, targets)?;
    let n = pred.len() as f64;
    Ok((&pred - &targets).mapv(|d| 2.0 * d / n))
}

fn check_same(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<()> {
    if a.nrows() != b.nrows() {
        return Err(Error::shape("target rows", a.nrows(), b.nrows()));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::shape("target columns", a.ncols(), b.ncols()));
    }
    Ok(())
}
