//! Run configuration shared by training, checkpoints and campaigns.

use alloc::string::ToString;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Initial-state estimation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "FF")]
    Ff,
    #[serde(rename = "LSTM")]
    Lstm,
    #[serde(rename = "ZERO")]
    Zero,
    #[serde(rename = "RAND")]
    Rand,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [Self::Ff, Self::Lstm, Self::Zero, Self::Rand];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ff => "FF",
            Self::Lstm => "LSTM",
            Self::Zero => "ZERO",
            Self::Rand => "RAND",
        }
    }

    /// FF and LSTM carry trainable parameters; ZERO and RAND do not.
    pub fn is_learned(self) -> bool {
        matches!(self, Self::Ff | Self::Lstm)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "FF" => Ok(Self::Ff),
            "LSTM" => Ok(Self::Lstm),
            "ZERO" => Ok(Self::Zero),
            "RAND" => Ok(Self::Rand),
            other => Err(Error::Contract(alloc::format!(
                "unknown estimator type `{other}` (expected FF, LSTM, ZERO or RAND)"
            ))),
        }
    }
}

/// Dimensions of the state-space model and its two networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
    /// Hidden units of both the transition and the output network.
    pub hidden: usize,
    /// Direct linear input-to-output term in both networks.
    pub skip: bool,
}

impl ModelSpec {
    pub fn new(n_x: usize, n_u: usize, n_y: usize) -> Self {
        Self { n_x, n_u, n_y, hidden: 15, skip: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 || self.n_u == 0 || self.n_y == 0 || self.hidden == 0 {
            return Err(Error::Contract("model dimensions must be at least 1".to_string()));
        }
        Ok(())
    }
}

/// The training-algorithm factors plus the knobs that stay fixed within a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub est_type: EstimatorKind,
    /// Wall-clock budget of the optimization loop, seconds.
    pub max_time: f64,
    pub batch_size: usize,
    pub seq_fit_len: usize,
    pub seq_est_len: usize,
    pub est_hidden_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub val_fraction: f64,
    /// Stride of the validation window enumeration; `None` means `seq_fit_len`.
    pub val_stride: Option<usize>,
    pub val_every: usize,
    /// Iteration cap that replaces the time budget (reproducible tests).
    pub max_iters: Option<u64>,
    /// Standardize signals with training-split statistics.
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            est_type: EstimatorKind::Ff,
            max_time: 300.0,
            batch_size: 32,
            seq_fit_len: 40,
            seq_est_len: 10,
            est_hidden_size: 15,
            learning_rate: 1e-3,
            seed: 0,
            val_fraction: 0.2,
            val_stride: None,
            val_every: 20,
            max_iters: None,
            normalize: true,
        }
    }
}

impl TrainConfig {
    /// Total subsequence length `m = m_e + m_f`.
    pub fn seq_len(&self) -> usize {
        self.seq_est_len + self.seq_fit_len
    }

    pub fn val_stride(&self) -> usize {
        self.val_stride.unwrap_or(self.seq_fit_len)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("batch_size", self.batch_size),
            ("seq_fit_len", self.seq_fit_len),
            ("seq_est_len", self.seq_est_len),
            ("est_hidden_size", self.est_hidden_size),
            ("val_every", self.val_every),
            ("val_stride", self.val_stride()),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Contract(alloc::format!("{name} must be at least 1")));
            }
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Contract("learning_rate must be positive".to_string()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Contract("val_fraction must lie in (0, 1)".to_string()));
        }
        if !self.max_time.is_finite() || (self.max_iters.is_none() && !(self.max_time > 0.0)) {
            return Err(Error::Contract("max_time must be positive".to_string()));
        }
        if self.max_iters == Some(0) {
            return Err(Error::Contract("max_iters must be at least 1".to_string()));
        }
        Ok(())
    }
}
