//! Neural state-space identification core.
//!
//! Everything in this crate is pure computation over `alloc` containers:
//! a small reverse-mode tape, MLP/LSTM layers built on it, the state-space
//! model and its initial-state estimators, the truncated simulation losses,
//! Adam, the FIT index and factorial grid enumeration. File formats, wall-clock
//! training and the CLI live in the `nss` crate.

#![no_std]
// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adam;
pub mod autodiff;
pub mod config;
pub mod data;
mod error;
pub mod estimators;
pub mod fit;
pub mod grid;
pub mod loss;
pub mod nets;
pub mod ssmodel;

pub use adam::{AdamConfig, AdamState};
pub use autodiff::{Gradients, ParamId, ParamStore, Tape, Var};
pub use config::{EstimatorKind, ModelSpec, TrainConfig};
pub use data::{Dataset, Normalizer, SubsequenceBatch};
pub use error::{Error, Result};
pub use estimators::StateEstimator;
pub use fit::{fit_index, FitSummary};
pub use grid::{Factor, FactorGrid};
pub use ssmodel::NeuralStateSpaceModel;
