use nss::analysis::{
    attrition, interactions, main_effects, replication_stats, sample_std, t_half_width, Filter, Histogram, Response,
    DEFAULT_BINS,
};
use nss::plot::{effects_svg, histogram_svg, interaction_svg};
use nss::report::{write_report, ReportOptions};
use nss::{RunRecord, RunStatus};
use nss_core::{EstimatorKind, Factor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn rec(est: EstimatorKind, batch: usize, seed: u64, fit: f64) -> RunRecord {
    RunRecord {
        est_type: est,
        max_time: 300.0,
        batch_size: batch,
        seq_fit_len: 40,
        seq_est_len: 10,
        est_hidden_size: 15,
        seed,
        fit_percent: Some(fit),
        val_loss: Some(1.0 / fit),
        iters: 100,
        wall_s: 1.0,
        status: RunStatus::Ok,
        checkpoint: String::new(),
    }
}

// two-sided 95% Student-t quantiles from printed tables, df = 1, 2, 4
const T975: [(usize, f64); 3] = [(1, 12.706_204_736), (2, 4.302_652_730), (4, 2.776_445_105)];

#[test]
fn two_level_means() {
    let records = vec![
        rec(EstimatorKind::Ff, 32, 0, 90.0),
        rec(EstimatorKind::Ff, 32, 1, 92.0),
        rec(EstimatorKind::Zero, 32, 0, 80.0),
        rec(EstimatorKind::Zero, 32, 1, 82.0),
    ];
    let t = main_effects(&records, Response::FitPercent, Factor::EstType, &Filter::default());
    let means: Vec<(&str, f64)> = t.levels.iter().map(|l| (l.level.as_str(), l.mean)).collect();
    assert_eq!(means, vec![("FF", 91.0), ("ZERO", 81.0)]);
    // sd = sqrt(2), k = 2
    let hw = T975[0].1 * 2f64.sqrt() / 2f64.sqrt();
    for l in &t.levels {
        assert!((l.half_width.unwrap() - hw).abs() < 1e-6, "{:?}", l.half_width);
    }
}

#[test]
fn t_intervals_against_table() {
    for (df, t) in T975 {
        let v: Vec<f64> = (0..=df).map(|i| (i * i) as f64 * 0.7 - 3.0).collect();
        let k = v.len() as f64;
        let mean = v.iter().sum::<f64>() / k;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        assert!((t_half_width(&v).unwrap() - t * sd / k.sqrt()).abs() < 1e-6 * t * sd);
    }
    assert_eq!(t_half_width(&[1.0]), None);
}

#[test]
fn constant_responses_have_zero_width() {
    let records: Vec<RunRecord> = (0..4).map(|s| rec(EstimatorKind::Ff, 16 << (s % 2), s, 88.0)).collect();
    let t = main_effects(&records, Response::FitPercent, Factor::BatchSize, &Filter::default());
    assert!(t.levels.iter().all(|l| l.half_width == Some(0.0) && l.mean == 88.0));
}

#[test]
fn singleton_level_is_kept() {
    let records = vec![rec(EstimatorKind::Ff, 32, 0, 90.0), rec(EstimatorKind::Ff, 32, 1, 91.0), rec(EstimatorKind::Rand, 32, 0, 70.0)];
    let t = main_effects(&records, Response::FitPercent, Factor::EstType, &Filter::default());
    let rand = t.levels.iter().find(|l| l.level == "RAND").unwrap();
    assert_eq!((rand.count, rand.mean, rand.half_width), (1, 70.0, None));
    assert!(t.to_csv().contains("RAND"));
}

#[test]
fn non_ok_runs_are_excluded() {
    let mut records = vec![rec(EstimatorKind::Ff, 32, 0, 90.0), rec(EstimatorKind::Ff, 32, 1, 92.0)];
    let mut bad = rec(EstimatorKind::Ff, 32, 2, 0.0);
    bad.status = RunStatus::Diverged;
    bad.fit_percent = None;
    records.push(bad);
    let t = main_effects(&records, Response::FitPercent, Factor::EstType, &Filter::default());
    assert_eq!(t.total_count(), 2);
    let a = attrition(&records, Factor::EstType, &Filter::default());
    assert_eq!((a[0].ok, a[0].diverged, a[0].infeasible), (2, 1, 0));
}

#[test]
fn filter_restricts_records() {
    let mut records: Vec<RunRecord> = (0..8).map(|s| rec(EstimatorKind::Ff, 32, s, 80.0 + s as f64)).collect();
    for r in records.iter_mut().take(4) {
        r.max_time = 3600.0;
    }
    let filter: Filter = "max_time=3600,seq_fit_len=40".parse().unwrap();
    let t = main_effects(&records, Response::FitPercent, Factor::EstType, &filter);
    assert_eq!(t.total_count(), 4);
    assert_eq!(t.levels[0].mean, 81.5);
    assert!("max_time".parse::<Filter>().is_err());
    assert!("colour=red".parse::<Filter>().is_err());
}

#[test]
fn balanced_interaction_cells() {
    let mut records = Vec::new();
    for (est, base) in [(EstimatorKind::Ff, 90.0), (EstimatorKind::Lstm, 85.0)] {
        for (b, shift) in [(32, 0.0), (64, 3.0)] {
            for s in 0..3 {
                records.push(rec(est, b, s, base + shift + s as f64));
            }
        }
    }
    let t = interactions(&records, Response::FitPercent, Factor::EstType, Factor::BatchSize, &Filter::default());
    assert_eq!(t.cell("FF", "32").unwrap().mean, 91.0);
    assert_eq!(t.cell("FF", "64").unwrap().mean, 94.0);
    assert_eq!(t.cell("LSTM", "32").unwrap().mean, 86.0);
    assert_eq!(t.cell("LSTM", "64").unwrap().count, 3);
}

#[test]
fn self_interaction_diagonal_is_main_effect() {
    let records: Vec<RunRecord> = (0..9).map(|s| rec(EstimatorKind::ALL[s as usize % 3], 32, s, 70.0 + (s * s) as f64)).collect();
    let main = main_effects(&records, Response::FitPercent, Factor::EstType, &Filter::default());
    let t = interactions(&records, Response::FitPercent, Factor::EstType, Factor::EstType, &Filter::default());
    for l in &main.levels {
        assert_eq!(t.cell(&l.level, &l.level).unwrap().mean, l.mean);
        for other in main.levels.iter().filter(|o| o.level != l.level) {
            assert!(t.cell(&l.level, &other.level).is_none());
        }
    }
}

#[test]
fn empty_cell_is_flagged() {
    let records = vec![rec(EstimatorKind::Ff, 32, 0, 90.0), rec(EstimatorKind::Ff, 64, 0, 91.0), rec(EstimatorKind::Zero, 32, 0, 80.0)];
    let t = interactions(&records, Response::FitPercent, Factor::EstType, Factor::BatchSize, &Filter::default());
    assert!(t.cell("ZERO", "64").is_none());
    let csv = t.to_csv();
    let row = csv.lines().find(|l| l.starts_with("ZERO,64")).expect("empty cell still listed");
    assert!(row.contains("true"), "{row}");
    assert!(interaction_svg(&t).starts_with("<svg"));
}

#[test]
fn replication_examples() {
    let s = replication_stats(&[1.0, 3.0], DEFAULT_BINS).unwrap();
    assert_eq!(s.mean, 2.0);
    assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
    assert!((s.three_sigma - 3.0 * 2f64.sqrt()).abs() < 1e-14);
    assert_eq!(s.histogram.counts.len(), 20);
    assert_eq!(s.histogram.total(), 2);

    let same = replication_stats(&[5.0; 7], 4).unwrap();
    assert_eq!((same.std, same.histogram.total()), (0.0, 7));
    assert!(replication_stats(&[1.0], 5).is_err());
}

#[test]
fn gaussian_draws_recover_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mu, sigma) = (98.44, 0.32);
    let v: Vec<f64> = Normal::new(mu, sigma).unwrap().sample_iter(&mut rng).take(100).collect();
    let s = replication_stats(&v, 10).unwrap();
    assert!((s.mean - mu).abs() < 4.0 * sigma / 10.0);
    assert!((s.std - sigma).abs() < 0.5 * sigma);
    assert_eq!(s.histogram.total(), 100);
    assert!(histogram_svg(&s.histogram, "FIT [%]", Some(s.mean)).contains("<rect"));
}

#[test]
fn histogram_edges_cover_range() {
    let h = Histogram::new(&[0.0, 0.5, 1.0, 1.0, 0.25], 4).unwrap();
    assert_eq!(h.edges.len(), 5);
    assert_eq!((h.edges[0], h.edges[4]), (0.0, 1.0));
    assert_eq!(h.counts, vec![1, 1, 1, 2]);
}

#[test]
fn std_helper() {
    assert_eq!(sample_std(&[2.0]), None);
    assert_eq!(sample_std(&[2.0, 4.0, 6.0]), Some(2.0));
}

#[test]
fn report_files() {
    let records: Vec<RunRecord> =
        (0..12).map(|s| rec(EstimatorKind::ALL[s as usize % 2], 32 << (s % 3), s, 80.0 + s as f64)).collect();
    let dir = tempfile::tempdir().unwrap();
    let opts = ReportOptions { factors: vec![Factor::EstType, Factor::BatchSize], ..ReportOptions::default() };
    let files = write_report(&records, &opts, dir.path()).unwrap();
    let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for expect in ["effects_est_type.csv", "effects_batch_size.svg", "interaction_est_type_batch_size.csv", "replication.csv", "histogram.svg", "attrition.csv"] {
        assert!(names.iter().any(|n| n == expect), "{expect} missing from {names:?}");
    }
    // same input, same bytes
    let again = tempfile::tempdir().unwrap();
    write_report(&records, &opts, again.path()).unwrap();
    for n in &names {
        assert_eq!(std::fs::read(dir.path().join(n)).unwrap(), std::fs::read(again.path().join(n)).unwrap(), "{n}");
    }
    let t = main_effects(&records, Response::FitPercent, Factor::BatchSize, &Filter::default());
    assert!(effects_svg(&t).ends_with("</svg>\n"));
}

proptest! {
    #[test]
    fn order_invariance_and_grand_mean(fits in prop::collection::vec(0.0f64..100.0, 4..30), perm_seed in any::<u64>()) {
        let records: Vec<RunRecord> =
            fits.iter().enumerate().map(|(i, &f)| rec(EstimatorKind::ALL[i % 4], 16 << (i % 3), i as u64, f)).collect();
        let mut shuffled = records.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        for factor in [Factor::EstType, Factor::BatchSize] {
            let a = main_effects(&records, Response::FitPercent, factor, &Filter::default());
            let b = main_effects(&shuffled, Response::FitPercent, factor, &Filter::default());
            prop_assert_eq!(a.levels.len(), b.levels.len());
            for (x, y) in a.levels.iter().zip(&b.levels) {
                prop_assert_eq!(&x.level, &y.level);
                prop_assert_eq!(x.count, y.count);
                prop_assert!((x.mean - y.mean).abs() < 1e-10);
            }
            let grand = fits.iter().sum::<f64>() / fits.len() as f64;
            prop_assert!((a.grand_mean() - grand).abs() < 1e-10);
            prop_assert_eq!(a.total_count(), fits.len());
        }
    }
}
