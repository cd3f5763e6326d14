//! Plain-loop reference implementations used as test oracles. Nothing here
//! touches the tape; parameters are read by name from the store.
#![allow(dead_code)]

use nss_core::loss::sequence_rng;
use nss_core::{Dataset, EstimatorKind, ModelSpec, ParamStore};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

fn param<'a>(store: &'a ParamStore, name: &str) -> &'a [f64] {
    store.value(store.id(name).unwrap_or_else(|_| panic!("missing {name}")))
}

/// `W x (+ b)` with `W` row-major `out x in`.
fn matvec(w: &[f64], x: &[f64], b: Option<&[f64]>) -> Vec<f64> {
    let cols = x.len();
    let rows = w.len() / cols;
    (0..rows)
        .map(|r| {
            let mut acc = b.map_or(0.0, |b| b[r]);
            for c in 0..cols {
                acc += w[r * cols + c] * x[c];
            }
            acc
        })
        .collect()
}

pub fn mlp(store: &ParamStore, prefix: &str, x: &[f64]) -> Vec<f64> {
    let p = |n: &str| param(store, &format!("{prefix}.{n}"));
    let h: Vec<f64> = matvec(p("w1"), x, Some(p("b1"))).into_iter().map(f64::tanh).collect();
    let mut y = matvec(p("w2"), &h, Some(p("b2")));
    if let Ok(id) = store.id(&format!("{prefix}.ws")) {
        for (yi, li) in y.iter_mut().zip(matvec(store.value(id), x, None)) {
            *yi += li;
        }
    }
    y
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn lstm(store: &ParamStore, prefix: &str, seq: &[Vec<f64>]) -> Vec<f64> {
    let p = |n: &str| param(store, &format!("{prefix}.{n}"));
    let hd = p("b_i").len();
    let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
    for x in seq {
        let xh: Vec<f64> = x.iter().chain(&h).copied().collect();
        let i: Vec<f64> = matvec(p("w_i"), &xh, Some(p("b_i"))).into_iter().map(sigmoid).collect();
        let f: Vec<f64> = matvec(p("w_f"), &xh, Some(p("b_f"))).into_iter().map(sigmoid).collect();
        let g: Vec<f64> = matvec(p("w_g"), &xh, Some(p("b_g"))).into_iter().map(f64::tanh).collect();
        let o: Vec<f64> = matvec(p("w_o"), &xh, Some(p("b_o"))).into_iter().map(sigmoid).collect();
        for k in 0..hd {
            c[k] = f[k] * c[k] + i[k] * g[k];
            h[k] = o[k] * c[k].tanh();
        }
    }
    matvec(p("w_proj"), &h, Some(p("b_proj")))
}

fn step(store: &ParamStore, x: &[f64], u: &[f64]) -> Vec<f64> {
    let xu: Vec<f64> = x.iter().chain(u).copied().collect();
    mlp(store, "f", &xu)
}

fn output(store: &ParamStore, x: &[f64]) -> Vec<f64> {
    mlp(store, "g", x)
}

/// Initial state of the fitting window for the window starting at `i`.
pub fn estimate(
    store: &ParamStore,
    spec: &ModelSpec,
    kind: EstimatorKind,
    m_e: usize,
    data: &Dataset,
    i: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let (n_u, n_y) = (spec.n_u, spec.n_y);
    let row = |k: usize| -> Vec<f64> {
        data.u()[k * n_u..(k + 1) * n_u].iter().chain(&data.y()[k * n_y..(k + 1) * n_y]).copied().collect()
    };
    let open_loop = |mut x: Vec<f64>| {
        for k in i..i + m_e {
            x = step(store, &x, &data.u()[k * n_u..(k + 1) * n_u]);
        }
        x
    };
    match kind {
        EstimatorKind::Ff => {
            let flat: Vec<f64> = (i..i + m_e).flat_map(row).collect();
            mlp(store, "est", &flat)
        }
        EstimatorKind::Lstm => {
            let seq: Vec<Vec<f64>> = (i..i + m_e).map(row).collect();
            lstm(store, "est", &seq)
        }
        EstimatorKind::Zero => open_loop(vec![0.0; spec.n_x]),
        EstimatorKind::Rand => {
            let draw: Vec<f64> = (0..spec.n_x).map(|_| StandardNormal.sample(rng)).collect();
            open_loop(draw)
        }
    }
}

/// `(1 / (b m)) sum_s sum_{j=m_e}^{m-1} ||y_{i_s+j} - y_hat_{i_s+j}||^2` by direct loops.
#[allow(clippy::too_many_arguments)]
pub fn naive_minibatch_loss(
    store: &ParamStore,
    spec: &ModelSpec,
    kind: EstimatorKind,
    m_e: usize,
    m_f: usize,
    starts: &[usize],
    data: &Dataset,
    batch_seed: u64,
) -> f64 {
    let (n_u, n_y) = (spec.n_u, spec.n_y);
    let m = m_e + m_f;
    let mut total = 0.0;
    for (s, &i) in starts.iter().enumerate() {
        let mut rng = sequence_rng(batch_seed, s);
        let mut x = estimate(store, spec, kind, m_e, data, i, &mut rng);
        for j in m_e..m {
            let k = i + j;
            let y_hat = output(store, &x);
            for c in 0..n_y {
                let e = data.y()[k * n_y + c] - y_hat[c];
                total += e * e;
            }
            x = step(store, &x, &data.u()[k * n_u..(k + 1) * n_u]);
        }
    }
    total / (starts.len() * m) as f64
}

/// FIT by direct loops: 100 * (1 - ||y - y_hat|| / ||y - mean(y)||).
pub fn naive_fit(y: &[f64], y_hat: &[f64]) -> f64 {
    let mut mean = 0.0;
    for v in y {
        mean += v;
    }
    mean /= y.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..y.len() {
        num += (y[k] - y_hat[k]).powi(2);
        den += (y[k] - mean).powi(2);
    }
    100.0 * (1.0 - num.sqrt() / den.sqrt())
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
}

pub fn random_dataset(seed: u64, n: usize, n_u: usize, n_y: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Dataset::new("random", n_u, n_y, random_vec(&mut rng, n * n_u, 1.0), random_vec(&mut rng, n * n_y, 1.0)).unwrap()
}

/// Overwrites every parameter with a uniform draw in `[-scale, scale]`.
pub fn randomize(store: &mut ParamStore, seed: u64, scale: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    store.as_flat_mut().iter_mut().for_each(|v| *v = scale * rng.random_range(-1.0..1.0));
}
