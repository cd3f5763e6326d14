//! In-memory datasets, normalization, hold-out splitting and subsequence
//! window extraction.
//!
//! A window starting at `i` covers `[i, i + m)` with `m = m_e + m_f`: the
//! first `m_e` samples feed the estimator, the remaining `m_f` are scored.
//! Admissible starts are `0..=n - m - 1`, so the last sample of a split is
//! never the end of a window.

mod synth;

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

pub use synth::{spectral_radius_bound, synth_system, SynthOptions, SynthSystem};

/// Aligned input/output record, row-major (`n x n_u` and `n x n_y`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub sample_rate: Option<f64>,
    n_u: usize,
    n_y: usize,
    u: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, n_u: usize, n_y: usize, u: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n_u == 0 || n_y == 0 {
            return Err(Error::Contract("datasets need at least one input and one output channel".into()));
        }
        if !u.len().is_multiple_of(n_u) || !y.len().is_multiple_of(n_y) || u.len() / n_u != y.len() / n_y {
            return Err(Error::Contract(alloc::format!(
                "input has {} values for {n_u} channels, output {} for {n_y}: lengths differ",
                u.len(),
                y.len()
            )));
        }
        if u.is_empty() {
            return Err(Error::Contract("dataset is empty".into()));
        }
        if let Some(i) = u.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { location: alloc::format!("dataset value #{i}") });
        }
        Ok(Self { name: name.into(), sample_rate: None, n_u, n_y, u, y })
    }

    pub fn len(&self) -> usize {
        self.u.len() / self.n_u
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Input rows `start..start + len`, flattened.
    pub fn u_rows(&self, start: usize, len: usize) -> &[f64] {
        &self.u[start * self.n_u..(start + len) * self.n_u]
    }

    pub fn y_rows(&self, start: usize, len: usize) -> &[f64] {
        &self.y[start * self.n_y..(start + len) * self.n_y]
    }

    pub fn u_channel(&self, c: usize) -> Vec<f64> {
        self.u.iter().skip(c).step_by(self.n_u).copied().collect()
    }

    pub fn y_channel(&self, c: usize) -> Vec<f64> {
        self.y.iter().skip(c).step_by(self.n_y).copied().collect()
    }

    /// Rows `start..end` as a new dataset.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::Contract(alloc::format!("row range {start}..{end} out of 0..{}", self.len())));
        }
        let mut d = Self::new(
            self.name.clone(),
            self.n_u,
            self.n_y,
            self.u_rows(start, end - start).to_vec(),
            self.y_rows(start, end - start).to_vec(),
        )?;
        d.sample_rate = self.sample_rate;
        Ok(d)
    }
}

/// Channelwise standardization with population statistics.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Normalizer {
    pub u_mean: Vec<f64>,
    pub u_std: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub y_std: Vec<f64>,
}

fn channel_stats(values: &[f64], channels: usize) -> (Vec<f64>, Vec<f64>) {
    let n = (values.len() / channels) as f64;
    let mut mean = alloc::vec![0.0; channels];
    for row in values.chunks(channels) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = alloc::vec![0.0; channels];
    for row in values.chunks(channels) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var
        .into_iter()
        .map(|s| {
            let sd = libm::sqrt(s / n);
            // constant channels are only centered
            if sd > 0.0 && sd.is_finite() { sd } else { 1.0 }
        })
        .collect();
    (mean, std)
}

fn apply(values: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
    values
        .chunks(mean.len())
        .flat_map(|row| row.iter().zip(mean).zip(std).map(|((v, m), s)| (v - m) / s))
        .collect()
}

fn invert(values: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
    values
        .chunks(mean.len())
        .flat_map(|row| row.iter().zip(mean).zip(std).map(|((v, m), s)| v * s + m))
        .collect()
}

impl Normalizer {
    pub fn fit(data: &Dataset) -> Self {
        let (u_mean, u_std) = channel_stats(&data.u, data.n_u);
        let (y_mean, y_std) = channel_stats(&data.y, data.n_y);
        Self { u_mean, u_std, y_mean, y_std }
    }

    pub fn identity(n_u: usize, n_y: usize) -> Self {
        Self {
            u_mean: alloc::vec![0.0; n_u],
            u_std: alloc::vec![1.0; n_u],
            y_mean: alloc::vec![0.0; n_y],
            y_std: alloc::vec![1.0; n_y],
        }
    }

    fn check(&self, data: &Dataset) -> Result<()> {
        if data.n_u != self.u_mean.len() || data.n_y != self.y_mean.len() {
            return Err(Error::Contract(alloc::format!(
                "normalizer is for {}/{} channels, dataset has {}/{}",
                self.u_mean.len(),
                self.y_mean.len(),
                data.n_u,
                data.n_y
            )));
        }
        Ok(())
    }

    pub fn normalize(&self, data: &Dataset) -> Result<Dataset> {
        self.check(data)?;
        Ok(Dataset {
            name: data.name.clone(),
            sample_rate: data.sample_rate,
            n_u: data.n_u,
            n_y: data.n_y,
            u: apply(&data.u, &self.u_mean, &self.u_std),
            y: apply(&data.y, &self.y_mean, &self.y_std),
        })
    }

    pub fn denormalize(&self, data: &Dataset) -> Result<Dataset> {
        self.check(data)?;
        Ok(Dataset {
            name: data.name.clone(),
            sample_rate: data.sample_rate,
            n_u: data.n_u,
            n_y: data.n_y,
            u: invert(&data.u, &self.u_mean, &self.u_std),
            y: invert(&data.y, &self.y_mean, &self.y_std),
        })
    }

    /// Maps row-major normalized outputs back to physical units.
    pub fn denormalize_y(&self, y: &[f64]) -> Vec<f64> {
        invert(y, &self.y_mean, &self.y_std)
    }

    pub fn normalize_y(&self, y: &[f64]) -> Vec<f64> {
        apply(y, &self.y_mean, &self.y_std)
    }
}

/// Contiguous prefix for training and tail for validation. The tail has
/// `round(n * val_fraction)` rows; both parts must hold at least one
/// `m`-window, i.e. `m + 1` rows.
pub fn split_train_val(data: &Dataset, val_fraction: f64, m: usize) -> Result<(Dataset, Dataset)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Contract("val_fraction must lie in (0, 1)".into()));
    }
    let n = data.len();
    let n_val = libm::round(n as f64 * val_fraction) as usize;
    let n_train = n - n_val;
    for len in [n_val, n_train] {
        if len < m + 1 {
            return Err(Error::InfeasibleSplit { len, needed: m + 1 });
        }
    }
    Ok((data.slice(0, n_train)?, data.slice(n_train, n)?))
}

/// Start indices of `b` subsequences plus the window lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsequenceBatch {
    pub starts: Vec<usize>,
    pub m_e: usize,
    pub m_f: usize,
}

impl SubsequenceBatch {
    pub fn seq_len(&self) -> usize {
        self.m_e + self.m_f
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }
}

fn admissible_starts(n: usize, m_e: usize, m_f: usize) -> Result<usize> {
    if m_e == 0 || m_f == 0 {
        return Err(Error::Contract("m_e and m_f must be at least 1".into()));
    }
    let m = m_e + m_f;
    if n < m + 1 {
        return Err(Error::InfeasibleSplit { len: n, needed: m + 1 });
    }
    Ok(n - m)
}

/// `b` starts drawn uniformly, with replacement, from `0..=n - m - 1`.
pub fn sample_batch<R: Rng + ?Sized>(data: &Dataset, m_e: usize, m_f: usize, b: usize, rng: &mut R) -> Result<SubsequenceBatch> {
    let count = admissible_starts(data.len(), m_e, m_f)?;
    if b == 0 {
        return Err(Error::Contract("batch size must be at least 1".into()));
    }
    let starts = (0..b).map(|_| rng.random_range(0..count)).collect();
    Ok(SubsequenceBatch { starts, m_e, m_f })
}

/// Starts `0, stride, 2 stride, ...` up to `n - m - 1`, in order.
pub fn enumerate_windows(data: &Dataset, m_e: usize, m_f: usize, stride: usize) -> Result<SubsequenceBatch> {
    let count = admissible_starts(data.len(), m_e, m_f)?;
    if stride == 0 {
        return Err(Error::Contract("stride must be at least 1".into()));
    }
    Ok(SubsequenceBatch { starts: (0..count).step_by(stride).collect(), m_e, m_f })
}
