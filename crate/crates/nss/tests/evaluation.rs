mod support;

use nss::synth::{generator_checkpoint, synth_benchmark};
use nss::{evaluate_model, Checkpoint, InitPolicy};
use nss_core::data::{synth_system, SynthOptions};
use nss_core::{EstimatorKind, NeuralStateSpaceModel, Normalizer, ParamStore, StateEstimator, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{naive_fit, random_dataset, randomize};

fn checkpoint(kind: EstimatorKind, m_e: usize, seed: u64) -> Checkpoint {
    let spec = nss_core::ModelSpec { n_x: 2, n_u: 1, n_y: 2, hidden: 6, skip: true };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    NeuralStateSpaceModel::register(spec, &mut store, &mut rng).unwrap();
    StateEstimator::register(kind, m_e, 5, &spec, &mut store, &mut rng).unwrap();
    randomize(&mut store, seed + 50, 0.4);
    Checkpoint {
        model_spec: spec,
        config: TrainConfig { est_type: kind, seq_est_len: m_e, est_hidden_size: 5, ..TrainConfig::default() },
        normalizer: Normalizer::fit(&random_dataset(seed, 40, 1, 2)),
        params: store,
        best_val_loss: None,
        iteration: 0,
        rng_digest: seed,
    }
}

#[test]
fn generator_self_consistency() {
    for seed in 0..4 {
        let n_x = 2 + seed as usize % 2;
        let bench = synth_benchmark(seed, SynthOptions::new(n_x, 1, 1, 500, 0.0), 2000).unwrap();
        let ckpt = generator_checkpoint(&bench.system);
        let r = evaluate_model(&ckpt, &bench.test, InitPolicy::ZeroFull { skip: 10 * n_x }, false).unwrap();
        assert!(r.fit_percent >= 99.9, "seed {seed}: {}", r.fit_percent);
        assert_eq!(r.first_scored, 10 * n_x);
    }
}

#[test]
fn zero_estimator_equals_zero_start_skipping_m_e() {
    let test = random_dataset(3, 120, 1, 2);
    for m_e in [1, 5, 17] {
        let ckpt = checkpoint(EstimatorKind::Zero, m_e, m_e as u64);
        let a = evaluate_model(&ckpt, &test, InitPolicy::Estimator, true).unwrap();
        let b = evaluate_model(&ckpt, &test, InitPolicy::ZeroFull { skip: m_e }, true).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.fit_percent.to_bits(), b.fit_percent.to_bits());
    }
}

#[test]
fn fit_matches_direct_formula_on_trace() {
    let test = random_dataset(4, 90, 1, 2);
    for kind in EstimatorKind::ALL {
        let r = evaluate_model(&checkpoint(kind, 6, 2), &test, InitPolicy::Estimator, true).unwrap();
        let t = r.trace.as_ref().unwrap();
        assert_eq!(t.t.len(), 90 - 6);
        assert_eq!(t.t[0], 6);
        assert_eq!(r.n_test, 84);
        for c in 0..2 {
            let y: Vec<f64> = t.y.iter().skip(c).step_by(2).copied().collect();
            let s: Vec<f64> = t.y_sim.iter().skip(c).step_by(2).copied().collect();
            assert!((naive_fit(&y, &s) - r.per_channel[c]).abs() < 1e-10);
        }
        assert_eq!(&t.y[..], test.y_rows(6, 84));
    }
}

#[test]
fn rand_evaluation_is_deterministic() {
    let test = random_dataset(5, 60, 1, 2);
    let ckpt = checkpoint(EstimatorKind::Rand, 4, 9);
    let a = evaluate_model(&ckpt, &test, InitPolicy::Estimator, false).unwrap();
    let b = evaluate_model(&ckpt, &test, InitPolicy::Estimator, false).unwrap();
    assert_eq!(a, b);
    let other = Checkpoint { rng_digest: 10, ..ckpt };
    let c = evaluate_model(&other, &test, InitPolicy::Estimator, false).unwrap();
    assert_ne!(a.fit_percent, c.fit_percent);
}

#[test]
fn too_short_test_record() {
    let ckpt = checkpoint(EstimatorKind::Ff, 8, 1);
    assert!(evaluate_model(&ckpt, &random_dataset(1, 8, 1, 2), InitPolicy::Estimator, false).is_err());
    assert!(evaluate_model(&ckpt, &random_dataset(1, 8, 1, 2), InitPolicy::ZeroFull { skip: 8 }, false).is_err());
    assert!(evaluate_model(&ckpt, &random_dataset(1, 20, 2, 2), InitPolicy::Estimator, false).is_err());
}

#[test]
fn policy_text_round_trip() {
    for (text, p) in [
        ("estimator", InitPolicy::Estimator),
        ("zero-full", InitPolicy::ZeroFull { skip: 0 }),
        ("zero-full:30", InitPolicy::ZeroFull { skip: 30 }),
    ] {
        assert_eq!(text.parse::<InitPolicy>().unwrap(), p);
        assert_eq!(p.to_string().parse::<InitPolicy>().unwrap(), p);
    }
    assert!("zero".parse::<InitPolicy>().is_err());
    assert!("zero-full:x".parse::<InitPolicy>().is_err());
}

#[test]
fn report_outputs() {
    let test = random_dataset(6, 50, 1, 2);
    let r = evaluate_model(&checkpoint(EstimatorKind::Lstm, 5, 3), &test, InitPolicy::Estimator, true).unwrap();
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json["per_channel"].as_array().unwrap().len(), 2);
    assert_eq!(json["policy"]["policy"], "estimator");
    assert!(r.to_csv().lines().count() >= 2);

    let dir = tempfile::tempdir().unwrap();
    let files = r.trace.as_ref().unwrap().write(&dir.path().join("run")).unwrap();
    assert_eq!(files.len(), 2);
    let text = std::fs::read_to_string(&files[1]).unwrap();
    assert!(text.starts_with("t,y,y_sim,error\n"));
    assert_eq!(text.lines().count(), 1 + 45);
}

#[test]
fn generator_on_noisy_record() {
    let sys = synth_system(2, SynthOptions::new(2, 1, 1, 3000, 0.01)).unwrap();
    let r = evaluate_model(&generator_checkpoint(&sys), &sys.data, InitPolicy::ZeroFull { skip: 20 }, false).unwrap();
    // 1% relative noise costs about one FIT point
    assert!(r.fit_percent > 97.0 && r.fit_percent < 99.9, "{}", r.fit_percent);
}
