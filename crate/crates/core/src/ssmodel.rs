//! Neural state-space model `x_{k+1} = f(x_k, u_k)`, `y_k = g(x_k)`.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamStore, Tape, Var};
use crate::config::ModelSpec;
use crate::error::{Error, Result};
use crate::nets::{Mlp, MlpSpec};

/// Rollouts abort once any state entry exceeds this magnitude.
pub const DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralStateSpaceModel {
    pub spec: ModelSpec,
    /// Transition network over `[x; u]`.
    pub f: Mlp,
    /// Output network over `x`.
    pub g: Mlp,
}

/// States `x_0..=x_H` and outputs `y_0..=y_H`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n_x: usize,
    pub n_y: usize,
    pub states: Vec<f64>,
    pub outputs: Vec<f64>,
}

impl Trajectory {
    /// Number of time points (`H + 1`).
    pub fn len(&self) -> usize {
        self.states.len() / self.n_x
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.n_x..(k + 1) * self.n_x]
    }

    pub fn output(&self, k: usize) -> &[f64] {
        &self.outputs[k * self.n_y..(k + 1) * self.n_y]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }
}

fn check_state(x: &[f64], step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite() && libm::fabs(*v) <= DIVERGENCE_BOUND) {
        Ok(())
    } else {
        Err(Error::Divergence { step, sequence: None })
    }
}

impl NeuralStateSpaceModel {
    pub fn f_spec(spec: &ModelSpec) -> MlpSpec {
        MlpSpec::new(spec.n_x + spec.n_u, spec.hidden, spec.n_x, spec.skip)
    }

    pub fn g_spec(spec: &ModelSpec) -> MlpSpec {
        MlpSpec::new(spec.n_x, spec.hidden, spec.n_y, spec.skip)
    }

    /// Registers `f.*` and `g.*` parameters in `store`.
    pub fn register<R: Rng + ?Sized>(spec: ModelSpec, store: &mut ParamStore, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let f = Mlp::register("f", Self::f_spec(&spec), store, rng)?;
        let g = Mlp::register("g", Self::g_spec(&spec), store, rng)?;
        Ok(Self { spec, f, g })
    }

    pub fn bind(spec: ModelSpec, store: &ParamStore) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, f: Mlp::bind("f", Self::f_spec(&spec), store)?, g: Mlp::bind("g", Self::g_spec(&spec), store)? })
    }

    pub fn init(spec: ModelSpec, seed: u64) -> Result<(Self, ParamStore)> {
        let mut store = ParamStore::new();
        let model = Self::register(spec, &mut store, &mut ChaCha8Rng::seed_from_u64(seed))?;
        Ok((model, store))
    }

    fn check_len(&self, what: &str, got: usize, expected: usize) -> Result<()> {
        if got != expected {
            return Err(Error::Shape {
                node: alloc::format!("model {what}"),
                detail: alloc::format!("expected length {expected}, got {got}"),
            });
        }
        Ok(())
    }

    /// One transition on the tape.
    pub fn step_var(&self, tape: &mut Tape<'_>, x: Var, u: Var) -> Result<Var> {
        let xu = tape.concat(&[x, u])?;
        self.f.forward(tape, xu)
    }

    pub fn output_var(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        self.g.forward(tape, x)
    }

    /// Open-loop rollout on the tape from `x0`, returning the output nodes
    /// `y_0..y_{n_out-1}`; consumes the first `n_out - 1` rows of `u`.
    pub fn rollout_var(&self, tape: &mut Tape<'_>, x0: Var, u: &[f64], n_out: usize) -> Result<Vec<Var>> {
        let n_u = self.spec.n_u;
        if n_out == 0 || u.len() < (n_out - 1) * n_u {
            return Err(Error::Contract(alloc::format!("rollout of {n_out} outputs needs {} inputs", n_out.saturating_sub(1))));
        }
        check_state(tape.value(x0), 0)?;
        let mut outs = Vec::with_capacity(n_out);
        let mut x = x0;
        for k in 0..n_out {
            outs.push(self.output_var(tape, x)?);
            if k + 1 < n_out {
                let uk = tape.input(&u[k * n_u..(k + 1) * n_u]);
                x = self.step_var(tape, x, uk)?;
                check_state(tape.value(x), k + 1)?;
            }
        }
        Ok(outs)
    }

    /// Runs the transition `steps` times from `x0` on the tape; returns the final state.
    pub fn advance_var(&self, tape: &mut Tape<'_>, x0: Var, u: &[f64], steps: usize) -> Result<Var> {
        let n_u = self.spec.n_u;
        if u.len() < steps * n_u {
            return Err(Error::Contract(alloc::format!("advancing {steps} steps needs {steps} input rows")));
        }
        check_state(tape.value(x0), 0)?;
        let mut x = x0;
        for k in 0..steps {
            let uk = tape.input(&u[k * n_u..(k + 1) * n_u]);
            x = self.step_var(tape, x, uk)?;
            check_state(tape.value(x), k + 1)?;
        }
        Ok(x)
    }

    pub fn step(&self, store: &ParamStore, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_len("state", x.len(), self.spec.n_x)?;
        self.check_len("input", u.len(), self.spec.n_u)?;
        let mut tape = Tape::new(store);
        let xv = tape.input(x);
        let uv = tape.input(u);
        let next = self.step_var(&mut tape, xv, uv)?;
        Ok(tape.value(next).to_vec())
    }

    pub fn output(&self, store: &ParamStore, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len("state", x.len(), self.spec.n_x)?;
        let mut tape = Tape::new(store);
        let xv = tape.input(x);
        let y = self.output_var(&mut tape, xv)?;
        Ok(tape.value(y).to_vec())
    }

    /// Simulates over the `H = u.len() / n_u` input rows, producing `H + 1`
    /// states and outputs. Each step runs on its own short tape, so memory
    /// stays flat for long records; values are identical to the taped rollout.
    pub fn simulate(&self, store: &ParamStore, x_init: &[f64], u: &[f64]) -> Result<Trajectory> {
        let (n_x, n_u, n_y) = (self.spec.n_x, self.spec.n_u, self.spec.n_y);
        self.check_len("state", x_init.len(), n_x)?;
        if !u.len().is_multiple_of(n_u) {
            return Err(Error::Shape {
                node: "model input".into(),
                detail: alloc::format!("{} values is not a multiple of n_u = {n_u}", u.len()),
            });
        }
        check_state(x_init, 0)?;
        let horizon = u.len() / n_u;
        let mut states = Vec::with_capacity((horizon + 1) * n_x);
        let mut outputs = Vec::with_capacity((horizon + 1) * n_y);
        let mut x = x_init.to_vec();
        for k in 0..=horizon {
            let mut tape = Tape::new(store);
            let xv = tape.input(&x);
            let y = self.output_var(&mut tape, xv)?;
            outputs.extend_from_slice(tape.value(y));
            states.extend_from_slice(&x);
            if k < horizon {
                let uv = tape.input(&u[k * n_u..(k + 1) * n_u]);
                let next = self.step_var(&mut tape, xv, uv)?;
                x = tape.value(next).to_vec();
                check_state(&x, k + 1)?;
            }
        }
        Ok(Trajectory { n_x, n_y, states, outputs })
    }

    /// `simulate` for each `(x_init, window)` pair; windows must share a length.
    pub fn batched_rollout(&self, store: &ParamStore, x_inits: &[Vec<f64>], windows: &[Vec<f64>]) -> Result<Vec<Trajectory>> {
        if x_inits.len() != windows.len() {
            return Err(Error::Contract(alloc::format!(
                "{} initial states for {} input windows",
                x_inits.len(),
                windows.len()
            )));
        }
        if let Some(first) = windows.first() {
            if windows.iter().any(|w| w.len() != first.len()) {
                return Err(Error::Contract("ragged batch: input windows differ in length".into()));
            }
        }
        x_inits
            .iter()
            .zip(windows)
            .enumerate()
            .map(|(s, (x0, u))| {
                self.simulate(store, x0, u).map_err(|e| match e {
                    Error::Divergence { step, .. } => Error::Divergence { step, sequence: Some(s) },
                    other => other,
                })
            })
            .collect()
    }
}
