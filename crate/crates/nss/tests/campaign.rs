use std::fs;
use std::path::Path;

use nss::campaign::{read_results, RESULTS_FILE};
use nss::synth::{synth_benchmark, write_benchmark};
use nss::{replicate, run_campaign, CampaignData, CampaignFile, Checkpoint, Error, InitPolicy, RunStatus};
use nss_core::data::SynthOptions;
use nss_core::{EstimatorKind, FactorGrid, ModelSpec, TrainConfig};

fn data() -> CampaignData {
    let bench = synth_benchmark(3, SynthOptions::new(2, 1, 1, 800, 0.01), 300).unwrap();
    CampaignData {
        spec: ModelSpec { hidden: 6, ..ModelSpec::new(2, 1, 1) },
        train: bench.system.data,
        test: bench.test,
        policy: InitPolicy::Estimator,
    }
}

fn config(kind: EstimatorKind, seed: u64) -> TrainConfig {
    TrainConfig {
        est_type: kind,
        batch_size: 8,
        seq_fit_len: 20,
        seq_est_len: 5,
        est_hidden_size: 4,
        seed,
        max_iters: Some(5),
        val_every: 2,
        ..TrainConfig::default()
    }
}

fn rows(dir: &Path) -> usize {
    fs::read_to_string(dir.join(RESULTS_FILE)).unwrap().lines().count() - 1
}

#[test]
fn single_config_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_campaign(&[config(EstimatorKind::Ff, 0)], &data(), 1, dir.path()).unwrap();
    assert_eq!((r.executed, r.skipped, r.records.len()), (1, 0, 1));
    let rec = &r.records[0];
    assert_eq!(rec.status, RunStatus::Ok);
    assert_eq!(rec.iters, 5);
    assert!(rec.fit_percent.unwrap().is_finite());
    assert_eq!(rows(dir.path()), 1);
    let ckpt = Checkpoint::load(dir.path().join(&rec.checkpoint)).unwrap();
    assert_eq!(ckpt.best_val_loss, rec.val_loss);
    assert_eq!(read_results(dir.path().join(RESULTS_FILE)).unwrap(), r.records);
}

#[test]
fn results_header_in_factor_order() {
    let dir = tempfile::tempdir().unwrap();
    run_campaign(&[config(EstimatorKind::Zero, 0)], &data(), 1, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "est_type,max_time,batch_size,seq_fit_len,seq_est_len,est_hidden_size,seed,fit_percent,val_loss,iters,wall_s,status,checkpoint"
    );
}

#[test]
fn seeds_vary_results() {
    let dir = tempfile::tempdir().unwrap();
    let r = replicate(&config(EstimatorKind::Ff, 0), &[1, 2, 3], &data(), 1, dir.path()).unwrap();
    assert_eq!(r.records.len(), 3);
    let fits: Vec<f64> = r.records.iter().map(|r| r.fit_percent.unwrap()).collect();
    assert!(fits[0] != fits[1] || fits[1] != fits[2]);
}

#[test]
fn duplicate_seed_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let e = replicate(&config(EstimatorKind::Ff, 0), &[4, 5, 4], &data(), 1, dir.path()).unwrap_err();
    assert!(matches!(e, Error::Core(nss_core::Error::DuplicateSeed(4))), "{e}");
    assert!(replicate(&config(EstimatorKind::Ff, 0), &[], &data(), 1, dir.path()).is_err());
}

#[test]
fn infeasible_run_is_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let too_long = TrainConfig { seq_fit_len: 700, ..config(EstimatorKind::Zero, 0) };
    let r = run_campaign(&[too_long, config(EstimatorKind::Zero, 1)], &data(), 1, dir.path()).unwrap();
    let statuses: Vec<RunStatus> = r.records.iter().map(|r| r.status).collect();
    assert!(statuses.contains(&RunStatus::Infeasible) && statuses.contains(&RunStatus::Ok));
    let bad = r.records.iter().find(|r| r.status == RunStatus::Infeasible).unwrap();
    assert!(bad.fit_percent.is_none() && bad.checkpoint.is_empty());
}

#[test]
fn resume_skips_recorded_runs() {
    let dir = tempfile::tempdir().unwrap();
    let configs: Vec<TrainConfig> = (0..3).map(|s| config(EstimatorKind::Rand, s)).collect();
    run_campaign(&configs[..1], &data(), 1, dir.path()).unwrap();
    // a run cut off while writing leaves a partial line behind
    let path = dir.path().join(RESULTS_FILE);
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("RAND,300,8");
    fs::write(&path, text).unwrap();

    let r = run_campaign(&configs, &data(), 1, dir.path()).unwrap();
    assert_eq!((r.executed, r.skipped), (2, 1));
    let records = read_results(&path).unwrap();
    assert_eq!(records.len(), 3);
    let mut seeds: Vec<u64> = records.iter().map(|r| r.seed).collect();
    seeds.sort();
    assert_eq!(seeds, vec![0, 1, 2]);

    let again = run_campaign(&configs, &data(), 1, dir.path()).unwrap();
    assert_eq!((again.executed, again.skipped), (0, 3));
}

#[test]
fn longest_budget_first() {
    let dir = tempfile::tempdir().unwrap();
    let configs: Vec<TrainConfig> = [60.0, 600.0, 300.0]
        .into_iter()
        .map(|t| TrainConfig { max_time: t, ..config(EstimatorKind::Zero, 0) })
        .collect();
    let r = run_campaign(&configs, &data(), 1, dir.path()).unwrap();
    let order: Vec<f64> = r.records.iter().map(|r| r.max_time).collect();
    assert_eq!(order, vec![600.0, 300.0, 60.0]);
}

#[test]
fn zero_parallelism_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_campaign(&[config(EstimatorKind::Zero, 0)], &data(), 0, dir.path()).is_err());
}

#[test]
fn campaign_file() {
    let dir = tempfile::tempdir().unwrap();
    let bench = synth_benchmark(1, SynthOptions::new(2, 1, 1, 400, 0.01), 200).unwrap();
    write_benchmark(&bench, &dir.path().join("data")).unwrap();
    let grid = FactorGrid {
        est_type: vec![EstimatorKind::Ff, EstimatorKind::Zero],
        max_time: vec![300.0],
        batch_size: vec![32, 128],
        seq_fit_len: vec![40],
        seq_est_len: vec![10],
        est_hidden_size: vec![15],
        seeds: vec![0],
    };
    let file = serde_json::json!({
        "grid": grid,
        "train_data": "data/train.csv",
        "test_data": "data/test.csv",
        "n_x": 2,
        "max_iters": 3,
        "design": "wiener_hammerstein",
    });
    let path = dir.path().join("campaign.json");
    fs::write(&path, file.to_string()).unwrap();
    let c = CampaignFile::load(&path).unwrap();
    assert!(c.train_data.starts_with(dir.path()));
    let configs = c.configs().unwrap();
    assert_eq!(configs.len(), 4);
    assert!(configs.iter().all(|c| c.max_iters == Some(3)));
    let d = c.data().unwrap();
    assert_eq!((d.spec.n_x, d.spec.hidden, d.train.len()), (2, 15, 400));

    // 301 s is not a level of that design
    let mut off = c.clone();
    off.grid.max_time = vec![301.0];
    assert!(off.configs().is_err());
    off.design = None;
    assert!(off.configs().is_ok());

    let bad = file.as_object().unwrap().clone().into_iter().chain([("colour".to_string(), serde_json::json!(1))]);
    fs::write(&path, serde_json::Value::Object(bad.collect()).to_string()).unwrap();
    assert!(matches!(CampaignFile::load(&path), Err(Error::Format { .. })));
}
