//! Time-budgeted minibatch training with hold-out checkpoint selection.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nss_core::adam::AdamState;
use nss_core::data::{enumerate_windows, sample_batch};
use nss_core::loss::{reduce_terms, sequence_rng, sequence_term, LossEval};
use nss_core::{
    Dataset, ModelSpec, NeuralStateSpaceModel, Normalizer, ParamStore, StateEstimator, SubsequenceBatch, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};

/// Consecutive diverged batches tolerated before a run is abandoned.
pub const MAX_CONSECUTIVE_DIVERGED: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub iteration: u64,
    pub elapsed_s: f64,
    /// `None` for the initial row and for skipped (diverged) batches.
    pub train_loss: Option<f64>,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<LogRow>,
    /// Iterations attempted, including skipped ones.
    pub iterations: u64,
    /// Seconds spent in the optimization loop.
    pub elapsed_s: f64,
    pub diverged_batches: usize,
    /// `(iteration, val_loss)` for every improvement that replaced the best checkpoint.
    pub improvements: Vec<(u64, f64)>,
    pub warnings: Vec<String>,
}

fn tag_sequence(e: nss_core::Error, s: usize) -> nss_core::Error {
    match e {
        nss_core::Error::Divergence { step, .. } => nss_core::Error::Divergence { step, sequence: Some(s) },
        other => other,
    }
}

/// Minibatch loss with the per-window terms computed in parallel and reduced
/// in window order, so the result does not depend on the thread count.
pub fn parallel_minibatch_loss(
    store: &ParamStore,
    model: &NeuralStateSpaceModel,
    estimator: &StateEstimator,
    batch: &SubsequenceBatch,
    data: &Dataset,
    batch_seed: u64,
) -> nss_core::Result<LossEval> {
    let terms = batch
        .starts
        .par_iter()
        .enumerate()
        .map(|(s, &start)| {
            sequence_term(store, model, estimator, data, start, batch.m_f, &mut sequence_rng(batch_seed, s))
                .map_err(|e| tag_sequence(e, s))
        })
        .collect::<nss_core::Result<Vec<_>>>()?;
    Ok(reduce_terms(store, terms, batch.seq_len()))
}

/// Deterministic loss over enumerated windows, same scaling as the minibatch loss.
pub fn windows_loss(
    store: &ParamStore,
    model: &NeuralStateSpaceModel,
    estimator: &StateEstimator,
    windows: &SubsequenceBatch,
    data: &Dataset,
    batch_seed: u64,
) -> nss_core::Result<f64> {
    let terms = windows
        .starts
        .par_iter()
        .enumerate()
        .map(|(s, &start)| {
            let mut tape = nss_core::Tape::new(store);
            let mut rng = sequence_rng(batch_seed, s);
            let l = nss_core::loss::sequence_loss_var(&mut tape, model, estimator, data, start, windows.m_f, &mut rng)
                .map_err(|e| tag_sequence(e, s))?;
            Ok(tape.scalar_value(l))
        })
        .collect::<nss_core::Result<Vec<f64>>>()?;
    Ok(terms.iter().sum::<f64>() / (windows.len() * windows.seq_len()) as f64)
}

fn is_divergence(e: &nss_core::Error) -> bool {
    matches!(e, nss_core::Error::Divergence { .. } | nss_core::Error::NonFinite { .. })
}

fn check_channels(spec: &ModelSpec, data: &Dataset, label: &str) -> Result<()> {
    if data.n_u() != spec.n_u || data.n_y() != spec.n_y {
        return Err(Error::Invalid(format!(
            "{label} data has {} inputs and {} outputs, model expects {} and {}",
            data.n_u(),
            data.n_y(),
            spec.n_u,
            spec.n_y
        )));
    }
    Ok(())
}

/// Trains from a seeded initialization and returns the parameters with the
/// lowest validation loss seen (the initialization counts, at iteration 0).
/// Stops at `max_iters` when set, otherwise once `max_time` seconds of loop
/// time have elapsed.
pub fn train(spec: ModelSpec, config: &TrainConfig, train: &Dataset, val: &Dataset) -> Result<TrainOutcome> {
    spec.validate()?;
    config.validate()?;
    check_channels(&spec, train, "training")?;
    check_channels(&spec, val, "validation")?;
    let (m_e, m_f) = (config.seq_est_len, config.seq_fit_len);
    let needed = config.seq_len() + 1;
    for split in [train, val] {
        if split.len() < needed {
            return Err(nss_core::Error::InfeasibleSplit { len: split.len(), needed }.into());
        }
    }

    let normalizer = if config.normalize { Normalizer::fit(train) } else { Normalizer::identity(spec.n_u, spec.n_y) };
    let train_n = normalizer.normalize(train)?;
    let val_n = normalizer.normalize(val)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut store = ParamStore::new();
    let model = NeuralStateSpaceModel::register(spec, &mut store, &mut rng)?;
    let estimator =
        StateEstimator::register(config.est_type, m_e, config.est_hidden_size, &spec, &mut store, &mut rng)?;
    let rng_digest: u64 = rng.random();

    let mut warnings = Vec::new();
    if estimator.window_below_state_dim(spec.n_x) {
        warnings.push(format!("seq_est_len {m_e} is shorter than the state dimension {}", spec.n_x));
    }

    let val_windows = enumerate_windows(&val_n, m_e, m_f, config.val_stride())?;
    let val_loss = |store: &ParamStore| {
        windows_loss(store, &model, &estimator, &val_windows, &val_n, rng_digest)
            .ok()
            .filter(|v| v.is_finite())
    };

    let mut adam = AdamState::new(store.num_values());
    let start = Instant::now();
    let mut log = Vec::new();
    let mut improvements = Vec::new();

    let initial = val_loss(&store);
    log.push(LogRow { iteration: 0, elapsed_s: 0.0, train_loss: None, val_loss: initial });
    let mut best = (initial, 0u64, store.clone());
    if let Some(v) = initial {
        improvements.push((0, v));
    }

    let mut iteration = 0u64;
    let mut consecutive = 0usize;
    let mut diverged_batches = 0usize;
    let mut last_val_at = 0u64;
    loop {
        let done = match config.max_iters {
            Some(cap) => iteration >= cap,
            None => start.elapsed().as_secs_f64() >= config.max_time,
        };
        if done {
            break;
        }
        iteration += 1;
        let batch_seed: u64 = rng.random();
        let batch = sample_batch(&train_n, m_e, m_f, config.batch_size, &mut rng)?;
        let step = parallel_minibatch_loss(&store, &model, &estimator, &batch, &train_n, batch_seed)
            .and_then(|eval| {
                if !eval.value.is_finite() {
                    return Err(nss_core::Error::NonFinite { location: "minibatch loss".into() });
                }
                adam.step(&mut store, &eval.grads, config.learning_rate)?;
                Ok(eval.value)
            });
        let train_loss = match step {
            Ok(v) => {
                consecutive = 0;
                Some(v)
            }
            Err(e) if is_divergence(&e) => {
                consecutive += 1;
                diverged_batches += 1;
                if consecutive > MAX_CONSECUTIVE_DIVERGED {
                    return Err(Error::Diverged { consecutive, iteration });
                }
                None
            }
            Err(e) => return Err(e.into()),
        };

        let mut val = None;
        if iteration.is_multiple_of(config.val_every as u64) {
            val = val_loss(&store);
            last_val_at = iteration;
        }
        log.push(LogRow { iteration, elapsed_s: start.elapsed().as_secs_f64(), train_loss, val_loss: val });
        if let Some(v) = val {
            if best.0.is_none_or(|b| v < b) {
                best = (Some(v), iteration, store.clone());
                improvements.push((iteration, v));
            }
        }
    }
    if last_val_at != iteration {
        let v = val_loss(&store);
        if let Some(row) = log.last_mut() {
            row.val_loss = v;
        }
        if let Some(v) = v {
            if best.0.is_none_or(|b| v < b) {
                best = (Some(v), iteration, store.clone());
                improvements.push((iteration, v));
            }
        }
    }
    let elapsed_s = start.elapsed().as_secs_f64();

    let (best_val_loss, best_iter, params) = best;
    let checkpoint = Checkpoint {
        model_spec: spec,
        config: config.clone(),
        normalizer,
        params,
        best_val_loss,
        iteration: best_iter,
        rng_digest,
    };
    Ok(TrainOutcome { checkpoint, log, iterations: iteration, elapsed_s, diverged_batches, improvements, warnings })
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

/// Writes the log as CSV `iteration,elapsed_s,train_loss,val_loss`.
pub fn write_log(path: impl AsRef<Path>, log: &[LogRow]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("iteration,elapsed_s,train_loss,val_loss\n");
    for r in log {
        text.push_str(&format!("{},{:.6},{},{}\n", r.iteration, r.elapsed_s, opt(r.train_loss), opt(r.val_loss)));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
