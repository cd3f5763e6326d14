//! Truncated simulation losses.
//!
//! For a window starting at `i`, the estimator maps samples `i..i+m_e` to
//! `x_{i+m_e}`, the model is rolled over the fitting window, and the squared
//! output errors at `i+m_e..i+m` are summed. The minibatch loss divides the
//! total over `b` windows by `b * m` (not `b * m_f`).

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Gradients, ParamStore, Tape, Var};
use crate::data::{Dataset, SubsequenceBatch};
use crate::error::{Error, Result};
use crate::estimators::StateEstimator;
use crate::ssmodel::NeuralStateSpaceModel;

/// Loss value with its gradient over the whole parameter store.
#[derive(Debug, Clone)]
pub struct LossEval {
    pub value: f64,
    pub grads: Gradients,
}

/// Generator for the RAND draws of sequence `s` in a batch keyed by `batch_seed`.
pub fn sequence_rng(batch_seed: u64, s: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(batch_seed);
    rng.set_stream(s as u64);
    rng
}

fn tag_sequence(e: Error, s: usize) -> Error {
    match e {
        Error::Divergence { step, .. } => Error::Divergence { step, sequence: Some(s) },
        other => other,
    }
}

fn check_window(data: &Dataset, start: usize, m_e: usize, m_f: usize) -> Result<()> {
    if m_f == 0 || start + m_e + m_f > data.len() {
        return Err(Error::Contract(alloc::format!(
            "window {start}..{} outside record of {} samples",
            start + m_e + m_f,
            data.len()
        )));
    }
    Ok(())
}

/// Fitting-window output nodes `y_hat_{i+m_e} .. y_hat_{i+m-1}` for the window at `start`.
pub fn fitting_outputs_var(
    tape: &mut Tape<'_>,
    model: &NeuralStateSpaceModel,
    estimator: &StateEstimator,
    data: &Dataset,
    start: usize,
    m_f: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Var>> {
    let m_e = estimator.m_e;
    check_window(data, start, m_e, m_f)?;
    let x0 = estimator.estimate_var(tape, model, data.u_rows(start, m_e), data.y_rows(start, m_e), rng)?;
    model.rollout_var(tape, x0, data.u_rows(start + m_e, m_f), m_f)
}

/// `sum_{j=m_e}^{m-1} ||y_{i+j} - y_hat_{i+j|i}||^2` as a scalar node.
pub fn sequence_loss_var(
    tape: &mut Tape<'_>,
    model: &NeuralStateSpaceModel,
    estimator: &StateEstimator,
    data: &Dataset,
    start: usize,
    m_f: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Var> {
    let outs = fitting_outputs_var(tape, model, estimator, data, start, m_f, rng)?;
    let stacked = tape.concat(&outs)?;
    let neg_y = tape.input_vec(data.y_rows(start + estimator.m_e, m_f).iter().map(|v| -v).collect());
    let resid = tape.add(stacked, neg_y)?;
    Ok(tape.sum_squares(resid))
}

/// Fitting-window predictions (row-major, `m_f x n_y`) without gradients.
pub fn fitting_predictions(
    store: &ParamStore,
    model: &NeuralStateSpaceModel,
    estimator: &StateEstimator,
    data: &Dataset,
    start: usize,
    m_f: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mut tape = Tape::new(store);
    let outs = fitting_outputs_var(&mut tape, model, estimator, data, start, m_f, rng)?;
    Ok(outs.iter().flat_map(|&o| tape.value(o).to_vec()).collect())
}

/// Unscaled loss term of one window and its gradient.
pub fn sequence_term(
    store: &ParamStore,
    model: &NeuralStateSpaceModel,
    estimator: &StateEstimator,
    data: &Dataset,
    start: usize,
    m_f: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Gradients)> {
    let mut tape = Tape::new(store);
    let l = sequence_loss_var(&mut tape, model, estimator, data, start, m_f, rng)?;
    Ok((tape.scalar_value(l), tape.backward(l)?))
}

/// Combines per-window terms in order into the minibatch loss.
pub fn reduce_terms(store: &ParamStore, terms: Vec<(f64, Gradients)>, seq_len: usize) -> LossEval {
    let scale = 1.0 / (terms.len() * seq_len) as f64;
    let mut value = 0.0;
    let mut grads = Gradients::zeros(store);
    for (v, g) in &terms {
        value += v;
        grads.accumulate(g);
    }
    grads.scale(scale);
    LossEval { value: value * scale, grads }
}

/// Minibatch loss `(1 / (b m)) sum_s sum_{j=m_e}^{m-1} ||y - y_hat||^2` and its
/// gradient. Window `s` draws RAND initial states from `sequence_rng(batch_seed, s)`.
pub fn minibatch_loss(
    store: &ParamStore,
    model: &NeuralStateSpaceModel,
    estimator: &StateEstimator,
    batch: &SubsequenceBatch,
    data: &Dataset,
    batch_seed: u64,
) -> Result<LossEval> {
    check_batch(estimator, batch)?;
    let terms = batch
        .starts
        .iter()
        .enumerate()
        .map(|(s, &start)| {
            sequence_term(store, model, estimator, data, start, batch.m_f, &mut sequence_rng(batch_seed, s))
                .map_err(|e| tag_sequence(e, s))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce_terms(store, terms, batch.seq_len()))
}

/// Minibatch loss value only.
pub fn minibatch_loss_value(
    store: &ParamStore,
    model: &NeuralStateSpaceModel,
    estimator: &StateEstimator,
    batch: &SubsequenceBatch,
    data: &Dataset,
    batch_seed: u64,
) -> Result<f64> {
    check_batch(estimator, batch)?;
    let mut total = 0.0;
    for (s, &start) in batch.starts.iter().enumerate() {
        let mut tape = Tape::new(store);
        let l = sequence_loss_var(&mut tape, model, estimator, data, start, batch.m_f, &mut sequence_rng(batch_seed, s))
            .map_err(|e| tag_sequence(e, s))?;
        total += tape.scalar_value(l);
    }
    Ok(total / (batch.len() * batch.seq_len()) as f64)
}

/// The whole minibatch loss on one tape (single graph, for gradient checks).
pub fn minibatch_loss_var(
    tape: &mut Tape<'_>,
    model: &NeuralStateSpaceModel,
    estimator: &StateEstimator,
    batch: &SubsequenceBatch,
    data: &Dataset,
    batch_seed: u64,
) -> Result<Var> {
    check_batch(estimator, batch)?;
    let mut total: Option<Var> = None;
    for (s, &start) in batch.starts.iter().enumerate() {
        let l = sequence_loss_var(tape, model, estimator, data, start, batch.m_f, &mut sequence_rng(batch_seed, s))
            .map_err(|e| tag_sequence(e, s))?;
        total = Some(match total {
            Some(t) => tape.add(t, l)?,
            None => l,
        });
    }
    let scale = tape.scalar(1.0 / (batch.len() * batch.seq_len()) as f64);
    tape.mul(total.expect("non-empty batch"), scale)
}

fn check_batch(estimator: &StateEstimator, batch: &SubsequenceBatch) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    if batch.m_e != estimator.m_e {
        return Err(Error::WindowLength { expected: estimator.m_e, got: batch.m_e });
    }
    Ok(())
}

/// Full simulation error `sum_{k=0}^{n-1} ||y_k - y_hat_k||^2` from the
/// initial-state node `x0` (a parameter when optimized jointly).
pub fn full_sim_loss_var(tape: &mut Tape<'_>, model: &NeuralStateSpaceModel, x0: Var, data: &Dataset) -> Result<Var> {
    let n = data.len();
    let outs = model.rollout_var(tape, x0, data.u_rows(0, n - 1), n)?;
    let stacked = tape.concat(&outs)?;
    let neg_y = tape.input_vec(data.y().iter().map(|v| -v).collect());
    let resid = tape.add(stacked, neg_y)?;
    Ok(tape.sum_squares(resid))
}

/// Full simulation loss with gradient; `x0` is taken from the store entry `x0_id`.
pub fn full_sim_loss(
    store: &ParamStore,
    model: &NeuralStateSpaceModel,
    x0_id: crate::autodiff::ParamId,
    data: &Dataset,
) -> Result<LossEval> {
    let mut tape = Tape::new(store);
    let x0 = tape.param(x0_id);
    let l = full_sim_loss_var(&mut tape, model, x0, data)?;
    Ok(LossEval { value: tape.scalar_value(l), grads: tape.backward(l)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{EstimatorKind, ModelSpec};
    use alloc::vec;
    use rand::Rng;

    fn random_record(seed: u64, n: usize, n_u: usize, n_y: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = (0..n * n_u).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = (0..n * n_y).map(|_| rng.random_range(-1.0..1.0)).collect();
        Dataset::new("r", n_u, n_y, u, y).unwrap()
    }

    fn system(kind: EstimatorKind, m_e: usize) -> (NeuralStateSpaceModel, StateEstimator, ParamStore) {
        let spec = ModelSpec { n_x: 2, n_u: 1, n_y: 1, hidden: 4, skip: true };
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = NeuralStateSpaceModel::register(spec, &mut store, &mut rng).unwrap();
        let est = StateEstimator::register(kind, m_e, 3, &spec, &mut store, &mut rng).unwrap();
        (model, est, store)
    }

    #[test]
    fn copies_of_one_window_average_out() {
        let data = random_record(1, 40, 1, 1);
        let (model, est, store) = system(EstimatorKind::Ff, 3);
        let one = SubsequenceBatch { starts: vec![7], m_e: 3, m_f: 6 };
        let many = SubsequenceBatch { starts: vec![7; 5], m_e: 3, m_f: 6 };
        let a = minibatch_loss(&store, &model, &est, &one, &data, 0).unwrap().value;
        let b = minibatch_loss(&store, &model, &est, &many, &data, 0).unwrap().value;
        assert!((a - b).abs() <= 1e-15 * a.abs());
    }

    #[test]
    fn perfect_fit_is_zero() {
        // zero model, zero estimator, zero outputs
        let (model, est, mut store) = system(EstimatorKind::Ff, 2);
        store.as_flat_mut().iter_mut().for_each(|v| *v = 0.0);
        let mut data = random_record(2, 30, 1, 1);
        data = Dataset::new("z", 1, 1, data.u().to_vec(), vec![0.0; 30]).unwrap();
        let batch = SubsequenceBatch { starts: vec![0, 4, 9], m_e: 2, m_f: 5 };
        assert_eq!(minibatch_loss(&store, &model, &est, &batch, &data, 0).unwrap().value, 0.0);
    }

    #[test]
    fn split_and_single_tape_agree() {
        let data = random_record(3, 60, 1, 1);
        for kind in EstimatorKind::ALL {
            let (model, est, store) = system(kind, 4);
            let batch = SubsequenceBatch { starts: vec![0, 11, 30, 11], m_e: 4, m_f: 8 };
            let split = minibatch_loss(&store, &model, &est, &batch, &data, 77).unwrap();
            let (out, tape) = Tape::record(&store, |t| minibatch_loss_var(t, &model, &est, &batch, &data, 77)).unwrap();
            let single = tape.scalar_value(out);
            assert!((split.value - single).abs() <= 1e-13 * single.abs(), "{kind}");
            let g = tape.backward(out).unwrap();
            for (a, b) in split.grads.as_flat().iter().zip(g.as_flat()) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
            let v = minibatch_loss_value(&store, &model, &est, &batch, &data, 77).unwrap();
            assert_eq!(v, split.value);
        }
    }

    #[test]
    fn window_mismatch_rejected() {
        let data = random_record(3, 30, 1, 1);
        let (model, est, store) = system(EstimatorKind::Zero, 4);
        let batch = SubsequenceBatch { starts: vec![0], m_e: 3, m_f: 8 };
        assert!(minibatch_loss(&store, &model, &est, &batch, &data, 0).is_err());
        let batch = SubsequenceBatch { starts: vec![20], m_e: 4, m_f: 8 };
        assert!(minibatch_loss(&store, &model, &est, &batch, &data, 0).is_err());
    }

    #[test]
    fn divergence_tagged_with_sequence() {
        let data = random_record(4, 200, 1, 1);
        let (model, est, mut store) = system(EstimatorKind::Zero, 2);
        store.value_mut(model.f.ws.unwrap()).iter_mut().for_each(|v| *v = 30.0);
        let batch = SubsequenceBatch { starts: vec![0, 5], m_e: 2, m_f: 100 };
        match minibatch_loss(&store, &model, &est, &batch, &data, 0) {
            Err(Error::Divergence { sequence: Some(0), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn full_sim_single_sample() {
        let (model, _, mut store) = system(EstimatorKind::Zero, 1);
        let x0 = store.add("x0", 2, 1, vec![0.3, -0.7]).unwrap();
        let data = random_record(5, 1, 1, 1);
        let l = full_sim_loss(&store, &model, x0, &data).unwrap();
        let y_hat = model.output(&store, &[0.3, -0.7]).unwrap()[0];
        let expect = (data.y()[0] - y_hat) * (data.y()[0] - y_hat);
        assert_eq!(l.value, expect);
    }
}
