//! Full-factorial enumeration of training configurations.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{EstimatorKind, TrainConfig};
use crate::error::{Error, Result};

/// The experiment factors, in enumeration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Factor {
    EstType,
    MaxTime,
    BatchSize,
    SeqFitLen,
    SeqEstLen,
    EstHiddenSize,
    Seed,
}

impl Factor {
    pub const ALL: [Factor; 7] = [
        Self::EstType,
        Self::MaxTime,
        Self::BatchSize,
        Self::SeqFitLen,
        Self::SeqEstLen,
        Self::EstHiddenSize,
        Self::Seed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::EstType => "est_type",
            Self::MaxTime => "max_time",
            Self::BatchSize => "batch_size",
            Self::SeqFitLen => "seq_fit_len",
            Self::SeqEstLen => "seq_est_len",
            Self::EstHiddenSize => "est_hidden_size",
            Self::Seed => "seed",
        }
    }

    /// Level of this factor in `config`, formatted as in results tables.
    pub fn level(self, config: &TrainConfig) -> String {
        match self {
            Self::EstType => config.est_type.as_str().to_string(),
            Self::MaxTime => format_time(config.max_time),
            Self::BatchSize => config.batch_size.to_string(),
            Self::SeqFitLen => config.seq_fit_len.to_string(),
            Self::SeqEstLen => config.seq_est_len.to_string(),
            Self::EstHiddenSize => config.est_hidden_size.to_string(),
            Self::Seed => config.seed.to_string(),
        }
    }
}

/// Integral budgets print without a fractional part.
pub fn format_time(t: f64) -> String {
    if t == libm::trunc(t) && libm::fabs(t) < 1e15 {
        alloc::format!("{}", t as i64)
    } else {
        alloc::format!("{t}")
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        // train_time is the name used in figure captions for max_time
        if s == "train_time" {
            return Ok(Self::MaxTime);
        }
        Self::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Contract(alloc::format!("unknown factor `{s}`")))
    }
}

/// Levels per factor. Each replicate seed is crossed with every combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorGrid {
    pub est_type: Vec<EstimatorKind>,
    pub max_time: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub seq_fit_len: Vec<usize>,
    pub seq_est_len: Vec<usize>,
    pub est_hidden_size: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl FactorGrid {
    /// Levels of the Wiener-Hammerstein campaign (4 x 3 x 4 x 4 x 4).
    pub fn wiener_hammerstein() -> Self {
        Self {
            est_type: EstimatorKind::ALL.to_vec(),
            max_time: alloc::vec![300.0, 1800.0, 3600.0],
            batch_size: alloc::vec![32, 128, 512, 1032],
            seq_fit_len: alloc::vec![40, 80, 160, 320],
            seq_est_len: alloc::vec![10, 20, 40, 80],
            est_hidden_size: alloc::vec![15],
            seeds: alloc::vec![0],
        }
    }

    /// Levels of the pick-and-place campaign (4 x 2 x 3 x 3 x 3 x 2).
    pub fn pick_and_place() -> Self {
        Self {
            est_type: EstimatorKind::ALL.to_vec(),
            max_time: alloc::vec![300.0, 1800.0],
            batch_size: alloc::vec![32, 128, 1032],
            seq_fit_len: alloc::vec![64, 256, 512],
            seq_est_len: alloc::vec![10, 40, 100],
            est_hidden_size: alloc::vec![10, 30],
            seeds: alloc::vec![0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            (Factor::EstType, self.est_type.len()),
            (Factor::MaxTime, self.max_time.len()),
            (Factor::BatchSize, self.batch_size.len()),
            (Factor::SeqFitLen, self.seq_fit_len.len()),
            (Factor::SeqEstLen, self.seq_est_len.len()),
            (Factor::EstHiddenSize, self.est_hidden_size.len()),
            (Factor::Seed, self.seeds.len()),
        ];
        for (f, n) in counts {
            if n == 0 {
                return Err(Error::Contract(alloc::format!("factor {f} has no levels")));
            }
        }
        Ok(())
    }

    /// Product of the level counts.
    pub fn len(&self) -> usize {
        self.est_type.len()
            * self.max_time.len()
            * self.batch_size.len()
            * self.seq_fit_len.len()
            * self.seq_est_len.len()
            * self.est_hidden_size.len()
            * self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every level of `self` also appears in `reference`.
    pub fn check_levels_within(&self, reference: &FactorGrid) -> Result<()> {
        fn within<T: PartialEq + fmt::Debug>(f: Factor, ours: &[T], theirs: &[T]) -> Result<()> {
            match ours.iter().find(|v| !theirs.contains(v)) {
                Some(v) => Err(Error::Contract(alloc::format!("level {v:?} of {f} is not part of the declared design"))),
                None => Ok(()),
            }
        }
        within(Factor::EstType, &self.est_type, &reference.est_type)?;
        within(Factor::MaxTime, &self.max_time, &reference.max_time)?;
        within(Factor::BatchSize, &self.batch_size, &reference.batch_size)?;
        within(Factor::SeqFitLen, &self.seq_fit_len, &reference.seq_fit_len)?;
        within(Factor::SeqEstLen, &self.seq_est_len, &reference.seq_est_len)?;
        within(Factor::EstHiddenSize, &self.est_hidden_size, &reference.est_hidden_size)
    }

    /// Cartesian product in factor order (est_type outermost, seed
    /// innermost); fields not covered by a factor come from `base`.
    pub fn enumerate(&self, base: &TrainConfig) -> Result<Vec<TrainConfig>> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.len());
        for &est_type in &self.est_type {
            for &max_time in &self.max_time {
                for &batch_size in &self.batch_size {
                    for &seq_fit_len in &self.seq_fit_len {
                        for &seq_est_len in &self.seq_est_len {
                            for &est_hidden_size in &self.est_hidden_size {
                                for &seed in &self.seeds {
                                    out.push(TrainConfig {
                                        est_type,
                                        max_time,
                                        batch_size,
                                        seq_fit_len,
                                        seq_est_len,
                                        est_hidden_size,
                                        seed,
                                        ..base.clone()
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}
