//! Initial-state estimators mapping an `m_e`-sample input/output window to
//! the state at the window end.
//!
//! * FF: one-hidden-layer MLP with linear bypass over the flattened window
//!   `[u_0, y_0, u_1, y_1, ...]`.
//! * LSTM: one step per window sample over `[u_k; y_k]`, projected to `n_x`.
//! * ZERO: simulate the model across the window from `x = 0`.
//! * RAND: as ZERO, from a standard-Gaussian draw.
//!
//! The dummy estimators read only `u`; the simulated window is part of the
//! differentiated graph, so they still pass gradients to the model.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{ParamStore, Tape, Var};
use crate::config::{EstimatorKind, ModelSpec};
use crate::error::{Error, Result};
use crate::nets::{Lstm, LstmSpec, Mlp, MlpSpec};
use crate::ssmodel::NeuralStateSpaceModel;

const PREFIX: &str = "est";

#[derive(Debug, Clone, PartialEq)]
enum Net {
    None,
    Ff(Mlp),
    Lstm(Lstm),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateEstimator {
    pub kind: EstimatorKind,
    /// Window length `m_e`.
    pub m_e: usize,
    pub hidden: usize,
    net: Net,
}

impl StateEstimator {
    pub fn ff_spec(model: &ModelSpec, m_e: usize, hidden: usize) -> MlpSpec {
        MlpSpec::new(m_e * (model.n_u + model.n_y), hidden, model.n_x, true)
    }

    pub fn lstm_spec(model: &ModelSpec, hidden: usize) -> LstmSpec {
        LstmSpec::new(model.n_u + model.n_y, hidden, model.n_x)
    }

    fn check_window(m_e: usize) -> Result<()> {
        if m_e == 0 {
            return Err(Error::Contract("estimation window m_e must be at least 1".into()));
        }
        Ok(())
    }

    /// Creates the estimator, registering `est.*` parameters for FF and LSTM.
    pub fn register<R: Rng + ?Sized>(
        kind: EstimatorKind,
        m_e: usize,
        hidden: usize,
        model: &ModelSpec,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        Self::check_window(m_e)?;
        let net = match kind {
            EstimatorKind::Ff => Net::Ff(Mlp::register(PREFIX, Self::ff_spec(model, m_e, hidden), store, rng)?),
            EstimatorKind::Lstm => Net::Lstm(Lstm::register(PREFIX, Self::lstm_spec(model, hidden), store, rng)?),
            EstimatorKind::Zero | EstimatorKind::Rand => Net::None,
        };
        Ok(Self { kind, m_e, hidden, net })
    }

    pub fn bind(kind: EstimatorKind, m_e: usize, hidden: usize, model: &ModelSpec, store: &ParamStore) -> Result<Self> {
        Self::check_window(m_e)?;
        let net = match kind {
            EstimatorKind::Ff => Net::Ff(Mlp::bind(PREFIX, Self::ff_spec(model, m_e, hidden), store)?),
            EstimatorKind::Lstm => Net::Lstm(Lstm::bind(PREFIX, Self::lstm_spec(model, hidden), store)?),
            EstimatorKind::Zero | EstimatorKind::Rand => Net::None,
        };
        Ok(Self { kind, m_e, hidden, net })
    }

    /// Estimator without parameters. Estimating with FF or LSTM then fails
    /// with [`Error::MissingParams`].
    pub fn unparameterized(kind: EstimatorKind, m_e: usize) -> Result<Self> {
        Self::check_window(m_e)?;
        Ok(Self { kind, m_e, hidden: 0, net: Net::None })
    }

    /// FF network, if this is a parameterized FF estimator.
    pub fn ff(&self) -> Option<&Mlp> {
        match &self.net {
            Net::Ff(m) => Some(m),
            _ => None,
        }
    }

    pub fn lstm(&self) -> Option<&Lstm> {
        match &self.net {
            Net::Lstm(l) => Some(l),
            _ => None,
        }
    }

    /// True when `m_e < n_x`, below the window length that guarantees
    /// reconstructibility for observable systems.
    pub fn window_below_state_dim(&self, n_x: usize) -> bool {
        self.m_e < n_x
    }

    fn check_lengths(&self, spec: &ModelSpec, u: &[f64], y: &[f64]) -> Result<()> {
        for (got, ch) in [(u.len(), spec.n_u), (y.len(), spec.n_y)] {
            if got != self.m_e * ch {
                return Err(Error::WindowLength { expected: self.m_e * ch, got });
            }
        }
        Ok(())
    }

    /// State estimate at the window end as a tape node. `u_win` is
    /// `m_e x n_u`, `y_win` is `m_e x n_y`, both row-major. Only RAND draws
    /// from `rng`.
    pub fn estimate_var<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<'_>,
        model: &NeuralStateSpaceModel,
        u_win: &[f64],
        y_win: &[f64],
        rng: &mut R,
    ) -> Result<Var> {
        let spec = &model.spec;
        self.check_lengths(spec, u_win, y_win)?;
        let (n_u, n_y) = (spec.n_u, spec.n_y);
        match (self.kind, &self.net) {
            (EstimatorKind::Ff, Net::Ff(mlp)) => {
                let mut flat = Vec::with_capacity(self.m_e * (n_u + n_y));
                for k in 0..self.m_e {
                    flat.extend_from_slice(&u_win[k * n_u..(k + 1) * n_u]);
                    flat.extend_from_slice(&y_win[k * n_y..(k + 1) * n_y]);
                }
                let x = tape.input_vec(flat);
                mlp.forward(tape, x)
            }
            (EstimatorKind::Lstm, Net::Lstm(lstm)) => {
                let steps: Vec<Var> = (0..self.m_e)
                    .map(|k| {
                        let mut row = Vec::with_capacity(n_u + n_y);
                        row.extend_from_slice(&u_win[k * n_u..(k + 1) * n_u]);
                        row.extend_from_slice(&y_win[k * n_y..(k + 1) * n_y]);
                        tape.input_vec(row)
                    })
                    .collect();
                lstm.forward(tape, &steps)
            }
            (EstimatorKind::Ff, _) => Err(Error::MissingParams("FF")),
            (EstimatorKind::Lstm, _) => Err(Error::MissingParams("LSTM")),
            (EstimatorKind::Zero, _) => {
                let x0 = tape.input_vec(vec![0.0; spec.n_x]);
                model.advance_var(tape, x0, u_win, self.m_e)
            }
            (EstimatorKind::Rand, _) => {
                let draw: Vec<f64> = (0..spec.n_x).map(|_| StandardNormal.sample(rng)).collect();
                let x0 = tape.input_vec(draw);
                model.advance_var(tape, x0, u_win, self.m_e)
            }
        }
    }

    pub fn estimate<R: Rng + ?Sized>(
        &self,
        store: &ParamStore,
        model: &NeuralStateSpaceModel,
        u_win: &[f64],
        y_win: &[f64],
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let mut tape = Tape::new(store);
        let x = self.estimate_var(&mut tape, model, u_win, y_win, rng)?;
        Ok(tape.value(x).to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(kind: EstimatorKind, m_e: usize) -> (NeuralStateSpaceModel, StateEstimator, ParamStore) {
        let spec = ModelSpec::new(3, 2, 1);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let model = NeuralStateSpaceModel::register(spec, &mut store, &mut rng).unwrap();
        let est = StateEstimator::register(kind, m_e, 6, &spec, &mut store, &mut rng).unwrap();
        (model, est, store)
    }

    fn window(m_e: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = (0..m_e * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = (0..m_e).map(|_| rng.random_range(-1.0..1.0)).collect();
        (u, y)
    }

    fn zero_transition(model: &NeuralStateSpaceModel, store: &mut ParamStore) {
        for id in [model.f.w1, model.f.b1, model.f.w2, model.f.b2, model.f.ws.unwrap()] {
            store.value_mut(id).iter_mut().for_each(|v| *v = 0.0);
        }
    }

    #[test]
    fn zero_with_zero_dynamics() {
        let (model, est, mut store) = setup(EstimatorKind::Zero, 4);
        zero_transition(&model, &mut store);
        let (u, y) = window(4, 1);
        let x = est.estimate(&store, &model, &u, &y, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(x, vec![0.0; 3]);
    }

    #[test]
    fn rand_with_zero_dynamics_is_absorbed() {
        for m_e in [1, 3] {
            let (model, est, mut store) = setup(EstimatorKind::Rand, m_e);
            zero_transition(&model, &mut store);
            let (u, y) = window(m_e, 2);
            for seed in 0..5 {
                let x = est.estimate(&store, &model, &u, &y, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                assert_eq!(x, vec![0.0; 3]);
            }
        }
    }

    #[test]
    fn ff_zero_params_give_zero() {
        let (model, est, mut store) = setup(EstimatorKind::Ff, 5);
        let mlp = est.ff().unwrap().clone();
        for id in [mlp.w1, mlp.b1, mlp.w2, mlp.b2, mlp.ws.unwrap()] {
            store.value_mut(id).iter_mut().for_each(|v| *v = 0.0);
        }
        let (u, y) = window(5, 3);
        let x = est.estimate(&store, &model, &u, &y, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(x, vec![0.0; 3]);
    }

    #[test]
    fn dummy_estimators_ignore_outputs() {
        for kind in [EstimatorKind::Zero, EstimatorKind::Rand] {
            let (model, est, store) = setup(kind, 6);
            let (u, y) = window(6, 4);
            let y2: Vec<f64> = y.iter().map(|v| v * 3.0 - 1.0).collect();
            let a = est.estimate(&store, &model, &u, &y, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
            let b = est.estimate(&store, &model, &u, &y2, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ff_sensitive_to_every_entry() {
        let (model, est, store) = setup(EstimatorKind::Ff, 3);
        let (u, y) = window(3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let base = est.estimate(&store, &model, &u, &y, &mut rng).unwrap();
        for i in 0..u.len() {
            let mut u2 = u.clone();
            u2[i] += 0.1;
            assert_ne!(est.estimate(&store, &model, &u2, &y, &mut rng).unwrap(), base);
        }
        for i in 0..y.len() {
            let mut y2 = y.clone();
            y2[i] += 0.1;
            assert_ne!(est.estimate(&store, &model, &u, &y2, &mut rng).unwrap(), base);
        }
    }

    #[test]
    fn window_length_checked() {
        let (model, est, store) = setup(EstimatorKind::Zero, 4);
        let (u, y) = window(3, 1);
        let err = est.estimate(&store, &model, &u, &y, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert_eq!(err, Error::WindowLength { expected: 8, got: 6 });
    }

    #[test]
    fn learned_kinds_need_params() {
        let (model, _, store) = setup(EstimatorKind::Zero, 2);
        let (u, y) = window(2, 1);
        for (kind, name) in [(EstimatorKind::Ff, "FF"), (EstimatorKind::Lstm, "LSTM")] {
            let est = StateEstimator::unparameterized(kind, 2).unwrap();
            let err = est.estimate(&store, &model, &u, &y, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
            assert_eq!(err, Error::MissingParams(name));
        }
        assert!(StateEstimator::unparameterized(EstimatorKind::Zero, 0).is_err());
    }

    #[test]
    fn lstm_estimate_has_state_dim() {
        let (model, est, store) = setup(EstimatorKind::Lstm, 4);
        let (u, y) = window(4, 9);
        let x = est.estimate(&store, &model, &u, &y, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(x.len(), 3);
        assert!(!est.window_below_state_dim(3));
        assert!(StateEstimator::unparameterized(EstimatorKind::Zero, 2).unwrap().window_below_state_dim(3));
    }
}
