//! Layer definitions on top of the tape: a one-hidden-layer tanh MLP with an
//! optional linear bypass, and a single-layer LSTM with an output projection.
//!
//! Weights are drawn uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`,
//! biases start at zero.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};

fn pname(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        String::from(name)
    } else {
        format!("{prefix}.{name}")
    }
}

fn uniform_weights<R: Rng + ?Sized>(rng: &mut R, rows: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / libm::sqrt(fan_in as f64);
    (0..rows * fan_in).map(|_| rng.random_range(-bound..=bound)).collect()
}

fn register_weight<R: Rng + ?Sized>(
    store: &mut ParamStore,
    rng: &mut R,
    name: &str,
    rows: usize,
    fan_in: usize,
) -> Result<ParamId> {
    let w = uniform_weights(rng, rows, fan_in);
    store.add(name, rows, fan_in, w)
}

fn bind_checked(store: &ParamStore, name: &str, rows: usize, cols: usize) -> Result<ParamId> {
    let id = store.id(name)?;
    let shape = store.shape(id);
    if shape != (rows, cols) {
        return Err(Error::Shape {
            node: format!("param `{name}`"),
            detail: format!("stored as {}x{}, layer expects {rows}x{cols}", shape.0, shape.1),
        });
    }
    Ok(id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpSpec {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub skip: bool,
}

impl MlpSpec {
    pub fn new(in_dim: usize, hidden_dim: usize, out_dim: usize, skip: bool) -> Self {
        Self { in_dim, hidden_dim, out_dim, skip }
    }

    fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.hidden_dim == 0 || self.out_dim == 0 {
            return Err(Error::Contract("MLP dimensions must be at least 1".into()));
        }
        Ok(())
    }

    /// Fresh store holding one MLP with unprefixed parameter names.
    pub fn init_params(&self, seed: u64) -> Result<(Mlp, ParamStore)> {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mlp = Mlp::register("", *self, &mut store, &mut rng)?;
        Ok((mlp, store))
    }
}

/// `out = W2 tanh(W1 x + b1) + b2 (+ Ws x)`
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub ws: Option<ParamId>,
}

impl Mlp {
    pub fn register<R: Rng + ?Sized>(prefix: &str, spec: MlpSpec, store: &mut ParamStore, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let w1 = register_weight(store, rng, &pname(prefix, "w1"), spec.hidden_dim, spec.in_dim)?;
        let b1 = store.zeros(&pname(prefix, "b1"), spec.hidden_dim, 1)?;
        let w2 = register_weight(store, rng, &pname(prefix, "w2"), spec.out_dim, spec.hidden_dim)?;
        let b2 = store.zeros(&pname(prefix, "b2"), spec.out_dim, 1)?;
        let ws = if spec.skip {
            Some(register_weight(store, rng, &pname(prefix, "ws"), spec.out_dim, spec.in_dim)?)
        } else {
            None
        };
        Ok(Self { spec, w1, b1, w2, b2, ws })
    }

    /// Looks up an already-populated MLP by name, checking shapes.
    pub fn bind(prefix: &str, spec: MlpSpec, store: &ParamStore) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            w1: bind_checked(store, &pname(prefix, "w1"), spec.hidden_dim, spec.in_dim)?,
            b1: bind_checked(store, &pname(prefix, "b1"), spec.hidden_dim, 1)?,
            w2: bind_checked(store, &pname(prefix, "w2"), spec.out_dim, spec.hidden_dim)?,
            b2: bind_checked(store, &pname(prefix, "b2"), spec.out_dim, 1)?,
            ws: if spec.skip {
                Some(bind_checked(store, &pname(prefix, "ws"), spec.out_dim, spec.in_dim)?)
            } else {
                None
            },
        })
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let (w1, b1, w2, b2) = (tape.param(self.w1), tape.param(self.b1), tape.param(self.w2), tape.param(self.b2));
        let h = tape.affine(w1, x, Some(b1))?;
        let h = tape.tanh(h);
        let out = tape.affine(w2, h, Some(b2))?;
        match self.ws {
            Some(ws) => {
                let ws = tape.param(ws);
                let lin = tape.affine(ws, x, None)?;
                tape.add(out, lin)
            }
            None => Ok(out),
        }
    }

    /// Evaluates on a throwaway tape.
    pub fn eval(&self, store: &ParamStore, input: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new(store);
        let x = tape.input(input);
        let y = self.forward(&mut tape, x)?;
        Ok(tape.value(y).to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmSpec {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
}

impl LstmSpec {
    pub fn new(in_dim: usize, hidden_dim: usize, out_dim: usize) -> Self {
        Self { in_dim, hidden_dim, out_dim }
    }

    fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.hidden_dim == 0 || self.out_dim == 0 {
            return Err(Error::Contract("LSTM dimensions must be at least 1".into()));
        }
        Ok(())
    }

    pub fn init_params(&self, seed: u64) -> Result<(Lstm, ParamStore)> {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lstm = Lstm::register("", *self, &mut store, &mut rng)?;
        Ok((lstm, store))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Gate {
    w: ParamId,
    b: ParamId,
}

/// Single-layer LSTM over `[x_t; h_{t-1}]`, zero initial hidden and cell
/// state, followed by an affine projection of the last hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub spec: LstmSpec,
    input: Gate,
    forget: Gate,
    cell: Gate,
    output: Gate,
    proj: Gate,
}

const GATES: [&str; 4] = ["i", "f", "g", "o"];

impl Lstm {
    pub fn register<R: Rng + ?Sized>(prefix: &str, spec: LstmSpec, store: &mut ParamStore, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let fan_in = spec.in_dim + spec.hidden_dim;
        let mut gates = Vec::with_capacity(4);
        for g in GATES {
            let w = register_weight(store, rng, &pname(prefix, &format!("w_{g}")), spec.hidden_dim, fan_in)?;
            let b = store.zeros(&pname(prefix, &format!("b_{g}")), spec.hidden_dim, 1)?;
            gates.push(Gate { w, b });
        }
        let w = register_weight(store, rng, &pname(prefix, "w_proj"), spec.out_dim, spec.hidden_dim)?;
        let b = store.zeros(&pname(prefix, "b_proj"), spec.out_dim, 1)?;
        Ok(Self { spec, input: gates[0], forget: gates[1], cell: gates[2], output: gates[3], proj: Gate { w, b } })
    }

    pub fn bind(prefix: &str, spec: LstmSpec, store: &ParamStore) -> Result<Self> {
        spec.validate()?;
        let fan_in = spec.in_dim + spec.hidden_dim;
        let mut gates = Vec::with_capacity(4);
        for g in GATES {
            gates.push(Gate {
                w: bind_checked(store, &pname(prefix, &format!("w_{g}")), spec.hidden_dim, fan_in)?,
                b: bind_checked(store, &pname(prefix, &format!("b_{g}")), spec.hidden_dim, 1)?,
            });
        }
        let proj = Gate {
            w: bind_checked(store, &pname(prefix, "w_proj"), spec.out_dim, spec.hidden_dim)?,
            b: bind_checked(store, &pname(prefix, "b_proj"), spec.out_dim, 1)?,
        };
        Ok(Self { spec, input: gates[0], forget: gates[1], cell: gates[2], output: gates[3], proj })
    }

    fn gate(&self, tape: &mut Tape<'_>, gate: Gate, xh: Var) -> Result<Var> {
        let (w, b) = (tape.param(gate.w), tape.param(gate.b));
        tape.affine(w, xh, Some(b))
    }

    /// Runs the cell over `inputs` left to right and projects the final hidden state.
    pub fn forward(&self, tape: &mut Tape<'_>, inputs: &[Var]) -> Result<Var> {
        if inputs.is_empty() {
            return Err(Error::Contract("LSTM input sequence is empty".into()));
        }
        let hd = self.spec.hidden_dim;
        let mut h = tape.input_vec(vec![0.0; hd]);
        let mut c = tape.input_vec(vec![0.0; hd]);
        for &x in inputs {
            let xh = tape.concat(&[x, h])?;
            let i = self.gate(tape, self.input, xh)?;
            let i = tape.sigmoid(i);
            let f = self.gate(tape, self.forget, xh)?;
            let f = tape.sigmoid(f);
            let g = self.gate(tape, self.cell, xh)?;
            let g = tape.tanh(g);
            let o = self.gate(tape, self.output, xh)?;
            let o = tape.sigmoid(o);
            let fc = tape.mul(f, c)?;
            let ig = tape.mul(i, g)?;
            c = tape.add(fc, ig)?;
            let tc = tape.tanh(c);
            h = tape.mul(o, tc)?;
        }
        let (w, b) = (tape.param(self.proj.w), tape.param(self.proj.b));
        tape.affine(w, h, Some(b))
    }

    pub fn eval(&self, store: &ParamStore, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut tape = Tape::new(store);
        let xs: Vec<Var> = inputs.iter().map(|x| tape.input(x)).collect();
        let y = self.forward(&mut tape, &xs)?;
        Ok(tape.value(y).to_vec())
    }
}
