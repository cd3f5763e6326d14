//! Synthetic benchmark: a random stable neural state-space system driven by
//! white Gaussian input.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Dataset;
use crate::autodiff::ParamStore;
use crate::config::ModelSpec;
use crate::error::{Error, Result};
use crate::ssmodel::NeuralStateSpaceModel;

/// Generator settings. `noise_std` is relative: each output channel gets
/// Gaussian noise with standard deviation `noise_std` times the channel's
/// noise-free standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub n: usize,
    pub noise_std: f64,
    /// Spectral radius the linear part of the transition is scaled to; at most 0.97.
    pub spectral_radius: f64,
    /// Scale of the tanh branch relative to its default initialization.
    pub nonlinearity: f64,
    /// Append a pure accumulator state `x_acc <- x_acc + gain * u_0`.
    pub integrator: Option<f64>,
    pub hidden: usize,
}

impl SynthOptions {
    pub fn new(n_x: usize, n_u: usize, n_y: usize, n: usize, noise_std: f64) -> Self {
        Self { n_x, n_u, n_y, n, noise_std, spectral_radius: 0.9, nonlinearity: 0.5, integrator: None, hidden: 15 }
    }
}

#[derive(Debug, Clone)]
pub struct SynthSystem {
    pub data: Dataset,
    /// Noise-free outputs, row-major.
    pub clean_y: Vec<f64>,
    pub model: NeuralStateSpaceModel,
    pub params: ParamStore,
}

/// Upper bound on the spectral radius of a square row-major matrix via
/// Gelfand's formula on repeated squares, `rho <= ||A^(2^k)||_F^(1/2^k)`.
/// With 40 squarings the bound is tight to rounding for practical sizes.
pub fn spectral_radius_bound(a: &[f64], n: usize) -> f64 {
    assert_eq!(a.len(), n * n);
    let fro = |m: &[f64]| libm::sqrt(m.iter().map(|v| v * v).sum::<f64>());
    let s0 = fro(a);
    if s0 == 0.0 {
        return 0.0;
    }
    let mut m: Vec<f64> = a.iter().map(|v| v / s0).collect();
    let mut log_norm = libm::log(s0);
    let mut power = 1.0;
    for _ in 0..40 {
        let mut sq = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let aik = m[i * n + k];
                if aik != 0.0 {
                    for j in 0..n {
                        sq[i * n + j] += aik * m[k * n + j];
                    }
                }
            }
        }
        let s = fro(&sq);
        if s == 0.0 {
            return 0.0;
        }
        sq.iter_mut().for_each(|v| *v /= s);
        m = sq;
        log_norm = 2.0 * log_norm + libm::log(s);
        power *= 2.0;
    }
    libm::exp(log_norm / power)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Builds a random generator model, simulates it from the zero state and
/// returns the record plus the generator.
pub fn synth_system(seed: u64, opts: SynthOptions) -> Result<SynthSystem> {
    let SynthOptions { n_x, n_u, n_y, n, noise_std, spectral_radius, nonlinearity, integrator, hidden } = opts;
    if n_x == 0 || n_u == 0 || n_y == 0 || n == 0 || hidden == 0 {
        return Err(Error::Contract("synthetic system dimensions must be at least 1".into()));
    }
    if !(noise_std >= 0.0) || !(spectral_radius > 0.0 && spectral_radius <= 0.97) {
        return Err(Error::Contract("need noise_std >= 0 and spectral radius in (0, 0.97]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total_x = n_x + usize::from(integrator.is_some());
    let spec = ModelSpec { n_x: total_x, n_u, n_y, hidden, skip: true };
    let mut params = ParamStore::new();
    let model = NeuralStateSpaceModel::register(spec, &mut params, &mut rng)?;

    // random biases so the tanh branch is not odd-symmetric
    for id in [model.f.b1, model.g.b1] {
        params.value_mut(id).iter_mut().for_each(|b| *b = 0.5 * gaussian(&mut rng));
    }
    for id in [model.f.w2, model.g.w2] {
        params.value_mut(id).iter_mut().for_each(|w| *w *= nonlinearity);
    }

    // transition skip term is [A B] over (x, u); rescale the dynamic block of A
    let cols = total_x + n_u;
    let ws = model.f.ws.expect("generator uses a skip term");
    {
        let w = params.value_mut(ws);
        let mut a = vec![0.0; n_x * n_x];
        for i in 0..n_x {
            a[i * n_x..(i + 1) * n_x].copy_from_slice(&w[i * cols..i * cols + n_x]);
        }
        let rho = spectral_radius_bound(&a, n_x);
        let scale = if rho > 0.0 { spectral_radius / rho } else { 1.0 };
        for i in 0..n_x {
            for j in 0..n_x {
                w[i * cols + j] *= scale;
            }
            if integrator.is_some() {
                // the accumulator does not feed back into the other states
                w[i * cols + n_x] = 0.0;
            }
        }
        if let Some(gain) = integrator {
            let row = n_x * cols;
            w[row..row + cols].iter_mut().for_each(|v| *v = 0.0);
            w[row + n_x] = 1.0;
            w[row + total_x] = gain;
        }
    }
    if integrator.is_some() {
        // no nonlinear contribution to the accumulator row
        let w2 = params.value_mut(model.f.w2);
        w2[n_x * hidden..(n_x + 1) * hidden].iter_mut().for_each(|v| *v = 0.0);
        // and the accumulator does not enter the tanh branch (keeps it a pure integrator
        // without saturating the hidden layer as it drifts)
        let w1 = params.value_mut(model.f.w1);
        for r in 0..hidden {
            w1[r * cols + n_x] = 0.0;
        }
        let gw1 = params.value_mut(model.g.w1);
        for r in 0..hidden {
            gw1[r * total_x + n_x] = 0.0;
        }
    }

    let mut sys = SynthSystem { data: Dataset::new("synth", n_u, n_y, vec![0.0; n_u], vec![0.0; n_y])?, clean_y: Vec::new(), model, params };
    let (data, clean_y) = sys.excite(&mut rng, n, noise_std)?;
    sys.data = data;
    sys.clean_y = clean_y;
    Ok(sys)
}

impl SynthSystem {
    /// A fresh record from the generator: Gaussian input drawn from `rng`,
    /// simulation from the zero state, relative output noise. Returns the
    /// record and its noise-free outputs.
    pub fn excite(&self, rng: &mut ChaCha8Rng, n: usize, noise_std: f64) -> Result<(Dataset, Vec<f64>)> {
        let spec = self.model.spec;
        let (n_u, n_y) = (spec.n_u, spec.n_y);
        if n == 0 || !(noise_std >= 0.0) {
            return Err(Error::Contract("need n >= 1 and noise_std >= 0".into()));
        }
        let u: Vec<f64> = (0..n * n_u).map(|_| gaussian(rng)).collect();
        let traj = self.model.simulate(&self.params, &vec![0.0; spec.n_x], &u[..(n - 1) * n_u])?;
        let clean_y = traj.outputs;

        let mut y = clean_y.clone();
        if noise_std > 0.0 {
            let mut sd = vec![0.0; n_y];
            for c in 0..n_y {
                let ch: Vec<f64> = clean_y.iter().skip(c).step_by(n_y).copied().collect();
                let mean = ch.iter().sum::<f64>() / n as f64;
                sd[c] = libm::sqrt(ch.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64);
            }
            for (k, v) in y.iter_mut().enumerate() {
                *v += noise_std * sd[k % n_y] * gaussian(rng);
            }
        }
        Ok((Dataset::new("synth", n_u, n_y, u, y)?, clean_y))
    }
}
