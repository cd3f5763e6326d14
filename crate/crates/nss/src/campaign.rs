//! Factorial campaigns: every configuration is trained, evaluated on the test
//! record and appended to `results.csv` as soon as it finishes. Rows already in
//! the file are not run again.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use nss_core::data::split_train_val;
use nss_core::grid::format_time;
use nss_core::{Dataset, EstimatorKind, Factor, FactorGrid, ModelSpec, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::{evaluate_model, InitPolicy};
use crate::io::{create_dir, load_csv, Columns};
use crate::train::train;

pub const RESULTS_FILE: &str = "results.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Diverged,
    Infeasible,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Diverged => "diverged",
            Self::Infeasible => "infeasible",
        }
    }
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub est_type: EstimatorKind,
    pub max_time: f64,
    pub batch_size: usize,
    pub seq_fit_len: usize,
    pub seq_est_len: usize,
    pub est_hidden_size: usize,
    pub seed: u64,
    pub fit_percent: Option<f64>,
    pub val_loss: Option<f64>,
    pub iters: u64,
    pub wall_s: f64,
    pub status: RunStatus,
    /// Relative to the campaign directory; empty when no checkpoint was written.
    pub checkpoint: String,
}

/// Identity of a run: its factor levels.
pub type RunKey = (EstimatorKind, u64, usize, usize, usize, usize, u64);

pub fn config_key(c: &TrainConfig) -> RunKey {
    (c.est_type, c.max_time.to_bits(), c.batch_size, c.seq_fit_len, c.seq_est_len, c.est_hidden_size, c.seed)
}

impl RunRecord {
    pub fn key(&self) -> RunKey {
        (
            self.est_type,
            self.max_time.to_bits(),
            self.batch_size,
            self.seq_fit_len,
            self.seq_est_len,
            self.est_hidden_size,
            self.seed,
        )
    }

    /// Level of `factor` as printed in analysis tables.
    pub fn level(&self, factor: Factor) -> String {
        match factor {
            Factor::EstType => self.est_type.as_str().to_string(),
            Factor::MaxTime => format_time(self.max_time),
            Factor::BatchSize => self.batch_size.to_string(),
            Factor::SeqFitLen => self.seq_fit_len.to_string(),
            Factor::SeqEstLen => self.seq_est_len.to_string(),
            Factor::EstHiddenSize => self.est_hidden_size.to_string(),
            Factor::Seed => self.seed.to_string(),
        }
    }

    fn pending(c: &TrainConfig) -> Self {
        Self {
            est_type: c.est_type,
            max_time: c.max_time,
            batch_size: c.batch_size,
            seq_fit_len: c.seq_fit_len,
            seq_est_len: c.seq_est_len,
            est_hidden_size: c.est_hidden_size,
            seed: c.seed,
            fit_percent: None,
            val_loss: None,
            iters: 0,
            wall_s: 0.0,
            status: RunStatus::Infeasible,
            checkpoint: String::new(),
        }
    }
}

/// Data shared by all runs of a campaign, in physical units.
#[derive(Debug, Clone)]
pub struct CampaignData {
    pub spec: ModelSpec,
    /// Training record; each run splits off its own validation tail.
    pub train: Dataset,
    pub test: Dataset,
    pub policy: InitPolicy,
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    /// Every record in the results file after the campaign, in file order.
    pub records: Vec<RunRecord>,
    pub executed: usize,
    pub skipped: usize,
    pub warnings: Vec<String>,
}

fn run_name(c: &TrainConfig) -> String {
    format!(
        "{}_t{}_b{}_mf{}_me{}_h{}_s{}",
        c.est_type,
        format_time(c.max_time),
        c.batch_size,
        c.seq_fit_len,
        c.seq_est_len,
        c.est_hidden_size,
        c.seed
    )
}

fn status_of(e: &Error) -> RunStatus {
    match e {
        Error::Diverged { .. }
        | Error::Core(nss_core::Error::Divergence { .. })
        | Error::Core(nss_core::Error::NonFinite { .. }) => RunStatus::Diverged,
        _ => RunStatus::Infeasible,
    }
}

/// Trains and evaluates one configuration. Failures become a status, never an error.
pub fn run_one(config: &TrainConfig, data: &CampaignData, out_dir: &Path) -> RunRecord {
    let started = Instant::now();
    let mut record = RunRecord::pending(config);
    let outcome = (|| -> Result<()> {
        let (tr, val) = split_train_val(&data.train, config.val_fraction, config.seq_len())?;
        let out = train(data.spec, config, &tr, &val)?;
        record.iters = out.iterations;
        record.val_loss = out.checkpoint.best_val_loss;
        let rel = PathBuf::from("checkpoints").join(format!("{}.json", run_name(config)));
        out.checkpoint.save(out_dir.join(&rel))?;
        record.checkpoint = rel.to_string_lossy().into_owned();
        let report = evaluate_model(&out.checkpoint, &data.test, data.policy, false)?;
        if !report.fit_percent.is_finite() {
            return Err(nss_core::Error::NonFinite { location: "test FIT".into() }.into());
        }
        record.fit_percent = Some(report.fit_percent);
        Ok(())
    })();
    record.status = match &outcome {
        Ok(()) => RunStatus::Ok,
        Err(e) => status_of(e),
    };
    record.wall_s = started.elapsed().as_secs_f64();
    record
}

/// Reads a results file. Rows that do not parse (a run cut off mid-write) are ignored.
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path).map_err(|e| Error::csv(path, e))?;
    Ok(reader.deserialize().filter_map(|r| r.ok()).collect())
}

fn open_results(path: &Path) -> Result<(csv::Writer<std::fs::File>, Vec<RunRecord>)> {
    let existing = if path.exists() { read_results(path)? } else { Vec::new() };
    let mut file =
        OpenOptions::new().create(true).read(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
    let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    if len > 0 {
        // a partial last line must not swallow the next record
        let mut last = [0u8];
        file.seek(SeekFrom::End(-1)).and_then(|_| file.read_exact(&mut last)).map_err(|e| Error::io(path, e))?;
        if last[0] != b'\n' {
            file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
    }
    let writer = csv::WriterBuilder::new().has_headers(len == 0).from_writer(file);
    Ok((writer, existing))
}

/// Runs `configs` (longest budgets first) with `parallelism` worker threads.
pub fn run_campaign(
    configs: &[TrainConfig],
    data: &CampaignData,
    parallelism: usize,
    out_dir: &Path,
) -> Result<CampaignResult> {
    if parallelism == 0 {
        return Err(Error::Invalid("parallelism must be at least 1".into()));
    }
    create_dir(&out_dir.join("checkpoints"))?;
    let results = out_dir.join(RESULTS_FILE);
    let (writer, existing) = open_results(&results)?;

    let mut seen: HashSet<RunKey> = existing.iter().map(RunRecord::key).collect();
    let mut queue: Vec<&TrainConfig> = configs.iter().filter(|c| seen.insert(config_key(c))).collect();
    let skipped = configs.len() - queue.len();
    queue.sort_by(|a, b| b.max_time.total_cmp(&a.max_time));

    let mut warnings = Vec::new();
    if parallelism > 1 && queue.iter().any(|c| c.max_iters.is_none()) {
        warnings.push(format!(
            "{parallelism} parallel runs share the CPU; wall-clock budgets (max_time) are not comparable to serial runs"
        ));
    }

    let next = AtomicUsize::new(0);
    let sink = Mutex::new((writer, existing, None::<Error>));
    std::thread::scope(|scope| {
        for _ in 0..parallelism.min(queue.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(config) = queue.get(i) else { break };
                let record = run_one(config, data, out_dir);
                let mut guard = sink.lock().expect("results writer poisoned");
                let (writer, records, failure) = &mut *guard;
                let written = writer.serialize(&record).and_then(|_| writer.flush().map_err(csv::Error::from));
                if let Err(e) = written {
                    failure.get_or_insert(Error::csv(&results, e));
                }
                records.push(record);
            });
        }
    });
    let (_, records, failure) = sink.into_inner().expect("results writer poisoned");
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(CampaignResult { records, executed: queue.len(), skipped, warnings })
}

/// Runs `config` once per seed.
pub fn replicate(
    config: &TrainConfig,
    seeds: &[u64],
    data: &CampaignData,
    parallelism: usize,
    out_dir: &Path,
) -> Result<CampaignResult> {
    if seeds.is_empty() {
        return Err(Error::Invalid("replicate needs at least one seed".into()));
    }
    let mut seen = HashSet::new();
    if let Some(&dup) = seeds.iter().find(|s| !seen.insert(**s)) {
        return Err(nss_core::Error::DuplicateSeed(dup).into());
    }
    let configs: Vec<TrainConfig> = seeds.iter().map(|&seed| TrainConfig { seed, ..config.clone() }).collect();
    run_campaign(&configs, data, parallelism, out_dir)
}

fn default_parallelism() -> usize {
    1
}

fn default_hidden() -> usize {
    15
}

fn default_true() -> bool {
    true
}

/// Campaign description file (JSON). Relative data paths are resolved against
/// the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignFile {
    pub grid: FactorGrid,
    pub train_data: PathBuf,
    pub test_data: PathBuf,
    #[serde(default)]
    pub u_cols: Option<Vec<String>>,
    #[serde(default)]
    pub y_cols: Option<Vec<String>>,
    pub n_x: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_true")]
    pub skip: bool,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub init_policy: InitPolicy,
    #[serde(default)]
    pub learning_rate: Option<f64>,
    #[serde(default)]
    pub val_fraction: Option<f64>,
    #[serde(default)]
    pub val_stride: Option<usize>,
    #[serde(default)]
    pub val_every: Option<usize>,
    #[serde(default)]
    pub max_iters: Option<u64>,
    #[serde(default)]
    pub normalize: Option<bool>,
    /// Reject levels outside this named design (`wiener_hammerstein` or `pick_and_place`).
    #[serde(default)]
    pub design: Option<String>,
}

impl CampaignFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut file: Self = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [&mut file.train_data, &mut file.test_data] {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(file)
    }

    pub fn base_config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            val_fraction: self.val_fraction.unwrap_or(d.val_fraction),
            val_stride: self.val_stride,
            val_every: self.val_every.unwrap_or(d.val_every),
            max_iters: self.max_iters,
            normalize: self.normalize.unwrap_or(d.normalize),
            ..d
        }
    }

    pub fn configs(&self) -> Result<Vec<TrainConfig>> {
        match self.design.as_deref() {
            None => {}
            Some("wiener_hammerstein") => self.grid.check_levels_within(&FactorGrid::wiener_hammerstein())?,
            Some("pick_and_place") => self.grid.check_levels_within(&FactorGrid::pick_and_place())?,
            Some(other) => return Err(Error::Invalid(format!("unknown design `{other}`"))),
        }
        Ok(self.grid.enumerate(&self.base_config())?)
    }

    pub fn data(&self) -> Result<CampaignData> {
        let columns = Columns { u: self.u_cols.clone(), y: self.y_cols.clone() };
        let train = load_csv(&self.train_data, &columns)?;
        let test = load_csv(&self.test_data, &columns)?;
        let spec = ModelSpec { n_x: self.n_x, n_u: train.n_u(), n_y: train.n_y(), hidden: self.hidden, skip: self.skip };
        spec.validate()?;
        Ok(CampaignData { spec, train, test, policy: self.init_policy })
    }
}
