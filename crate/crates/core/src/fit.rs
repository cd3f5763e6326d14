//! FIT index: `100 (1 - ||y - y_hat|| / ||y - mean(y)||)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// FIT in percent for one channel.
pub fn fit_index(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.is_empty() || y.len() != y_hat.len() {
        return Err(Error::Contract(alloc::format!(
            "FIT needs equal non-zero lengths, got {} and {}",
            y.len(),
            y_hat.len()
        )));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let err: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    let dev: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    if !(dev > 0.0) {
        return Err(Error::UndefinedFit);
    }
    Ok(100.0 * (1.0 - libm::sqrt(err) / libm::sqrt(dev)))
}

/// Root mean squared error for one channel.
pub fn rmse(y: &[f64], y_hat: &[f64]) -> f64 {
    let err: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    libm::sqrt(err / y.len() as f64)
}

/// Per-channel FIT plus the FIT of the stacked residuals, each channel
/// centered on its own mean.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub per_channel: Vec<f64>,
    pub stacked: f64,
    pub rmse: Vec<f64>,
}

/// `y` and `y_hat` are row-major with `n_y` channels.
pub fn fit_summary(y: &[f64], y_hat: &[f64], n_y: usize) -> Result<FitSummary> {
    if n_y == 0 || y.len() != y_hat.len() || y.is_empty() || !y.len().is_multiple_of(n_y) {
        return Err(Error::Contract("FIT inputs must be non-empty, aligned and divisible by n_y".into()));
    }
    let channel = |v: &[f64], c: usize| -> Vec<f64> { v.iter().skip(c).step_by(n_y).copied().collect() };
    let mut per_channel = Vec::with_capacity(n_y);
    let mut rmses = Vec::with_capacity(n_y);
    let (mut err, mut dev) = (0.0, 0.0);
    for c in 0..n_y {
        let (yc, hc) = (channel(y, c), channel(y_hat, c));
        per_channel.push(fit_index(&yc, &hc)?);
        rmses.push(rmse(&yc, &hc));
        let mean = yc.iter().sum::<f64>() / yc.len() as f64;
        err += yc.iter().zip(&hc).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        dev += yc.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>();
    }
    let stacked = 100.0 * (1.0 - libm::sqrt(err) / libm::sqrt(dev));
    Ok(FitSummary { per_channel, stacked, rmse: rmses })
}
