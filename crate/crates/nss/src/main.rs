use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nss::analysis::{Filter, Response};
use nss::campaign::{read_results, CampaignFile, RESULTS_FILE};
use nss::report::{write_report, ReportOptions};
use nss::synth::{synth_benchmark, write_benchmark};
use nss::train::write_log;
use nss::{evaluate_model, load_csv, run_campaign, Checkpoint, Columns, InitPolicy};
use nss_core::data::{split_train_val, SynthOptions};
use nss_core::{EstimatorKind, Factor, ModelSpec, TrainConfig};

/// Neural state-space identification with learned initial-state estimators.
#[derive(Parser)]
#[command(name = "nss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[command(rename_all = "kebab-case")]
enum Command {
    /// Generate a synthetic benchmark: train.csv, test.csv and the generator checkpoint.
    SynthData(SynthArgs),
    /// Train one model and write its best-validation checkpoint and log.
    Train(TrainArgs),
    /// Simulate a checkpoint on a test record and report the FIT index.
    Evaluate(EvaluateArgs),
    /// Run a factorial campaign described by a JSON file.
    Campaign(CampaignArgs),
    /// Main effects, interactions and replicate statistics of a results file.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
#[command(rename_all = "snake_case")]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, env = "NSS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    n_x: usize,
    #[arg(long, default_value_t = 1)]
    n_u: usize,
    #[arg(long, default_value_t = 1)]
    n_y: usize,
    /// Training record length.
    #[arg(long, default_value_t = 10000)]
    n: usize,
    /// Test record length.
    #[arg(long, default_value_t = 5000)]
    n_test: usize,
    /// Output noise standard deviation relative to the noise-free output's.
    #[arg(long, default_value_t = 0.01)]
    noise_std: f64,
    /// Add an accumulator state driven by input 0 with this gain.
    #[arg(long)]
    integrator: Option<f64>,
}

#[derive(Args)]
#[command(rename_all = "snake_case")]
struct DataArgs {
    /// Dataset CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Input columns, comma separated (default: u0, u1, ...).
    #[arg(long, value_delimiter = ',')]
    u_cols: Option<Vec<String>>,
    /// Output columns, comma separated (default: y0, y1, ...).
    #[arg(long, value_delimiter = ',')]
    y_cols: Option<Vec<String>>,
}

impl DataArgs {
    fn load(&self) -> nss::Result<nss_core::Dataset> {
        load_csv(&self.data, &Columns { u: self.u_cols.clone(), y: self.y_cols.clone() })
    }
}

#[derive(Args)]
#[command(rename_all = "snake_case")]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Checkpoint to write.
    #[arg(long, default_value = "checkpoint.json")]
    out: PathBuf,
    /// Training log CSV to write.
    #[arg(long, default_value = "train_log.csv")]
    log: PathBuf,
    /// State dimension.
    #[arg(long, default_value_t = 2)]
    n_x: usize,
    /// Hidden units of the transition and output networks.
    #[arg(long, default_value_t = 15)]
    hidden: usize,
    /// Drop the linear skip term of the model networks.
    #[arg(long)]
    no_skip: bool,
    /// Initial-state estimator: FF, LSTM, ZERO or RAND.
    #[arg(long, default_value = "FF")]
    est_type: EstimatorKind,
    /// Training time budget in seconds. Designs: 300, 1800, 3600 (Wiener-Hammerstein); 300, 1800 (pick-and-place).
    #[arg(long, default_value_t = 300.0)]
    max_time: f64,
    /// Sequences per minibatch. Designs: 32, 128, 512, 1032 (Wiener-Hammerstein); 32, 128, 1032 (pick-and-place).
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Fitting window m_f. Designs: 40, 80, 160, 320 (Wiener-Hammerstein); 64, 256, 512 (pick-and-place).
    #[arg(long, default_value_t = 40)]
    seq_fit_len: usize,
    /// Estimation window m_e. Designs: 10, 20, 40, 80 (Wiener-Hammerstein); 10, 40, 100 (pick-and-place).
    #[arg(long, default_value_t = 10)]
    seq_est_len: usize,
    /// Estimator hidden size. Designs: 15 (Wiener-Hammerstein); 10, 30 (pick-and-place).
    #[arg(long, default_value_t = 15)]
    est_hidden_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, env = "NSS_SEED", default_value_t = 0)]
    seed: u64,
    /// Fraction of the record held out (contiguous tail) for validation.
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    /// Stride of the validation windows (default: seq_fit_len).
    #[arg(long)]
    val_stride: Option<usize>,
    /// Iterations between validation evaluations.
    #[arg(long, default_value_t = 20)]
    val_every: usize,
    /// Stop after this many iterations instead of after max_time.
    #[arg(long)]
    max_iters: Option<u64>,
    /// Train on raw signals instead of standardized ones.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args)]
#[command(rename_all = "snake_case")]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// estimator (first seq_est_len samples reconstruct the state) or zero-full[:skip].
    #[arg(long, default_value = "estimator")]
    init_policy: InitPolicy,
    /// FitReport JSON to write.
    #[arg(long, default_value = "report.json")]
    report: PathBuf,
    /// FitReport CSV to write.
    #[arg(long)]
    report_csv: Option<PathBuf>,
    /// Write per-channel traces `<trace>_y<c>.csv` with columns t, y, y_sim, error.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
#[command(rename_all = "snake_case")]
struct CampaignArgs {
    /// Campaign JSON: grid levels, data paths, model size, parallelism.
    #[arg(long)]
    config: PathBuf,
    /// Directory for results.csv and checkpoints.
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides the file's parallelism.
    #[arg(long)]
    parallelism: Option<usize>,
    /// Overrides the file's iteration cap.
    #[arg(long)]
    max_iters: Option<u64>,
    /// Print the number of runs and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
#[command(rename_all = "snake_case")]
struct AnalyzeArgs {
    /// Results CSV, or a campaign directory containing results.csv.
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// fit_percent, val_loss, wall_s or iters.
    #[arg(long, default_value = "fit_percent")]
    response: Response,
    /// Restrict to factor=level terms, e.g. max_time=3600,seq_fit_len=40.
    #[arg(long, default_value = "")]
    filter: Filter,
    /// Factors to analyse, comma separated (default: all with several levels).
    #[arg(long, value_delimiter = ',')]
    factors: Vec<Factor>,
    /// Histogram bins.
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

fn synth_data(a: SynthArgs) -> nss::Result<()> {
    let mut opts = SynthOptions::new(a.n_x, a.n_u, a.n_y, a.n, a.noise_std);
    opts.integrator = a.integrator;
    let bench = synth_benchmark(a.seed, opts, a.n_test)?;
    for p in write_benchmark(&bench, &a.out_dir)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn train_cmd(a: TrainArgs) -> nss::Result<()> {
    let data = a.data.load()?;
    let spec = ModelSpec { n_x: a.n_x, n_u: data.n_u(), n_y: data.n_y(), hidden: a.hidden, skip: !a.no_skip };
    let config = TrainConfig {
        est_type: a.est_type,
        max_time: a.max_time,
        batch_size: a.batch_size,
        seq_fit_len: a.seq_fit_len,
        seq_est_len: a.seq_est_len,
        est_hidden_size: a.est_hidden_size,
        learning_rate: a.learning_rate,
        seed: a.seed,
        val_fraction: a.val_fraction,
        val_stride: a.val_stride,
        val_every: a.val_every,
        max_iters: a.max_iters,
        normalize: !a.no_normalize,
    };
    config.validate()?;
    let (tr, val) = split_train_val(&data, config.val_fraction, config.seq_len())?;
    let out = nss::train(spec, &config, &tr, &val)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    out.checkpoint.save(&a.out)?;
    write_log(&a.log, &out.log)?;
    let best = out.checkpoint.best_val_loss.map(|v| format!("{v:e}")).unwrap_or_else(|| "none".into());
    println!(
        "iterations {} in {:.2} s, best val_loss {best} at iteration {}, {} diverged batches; wrote {} and {}",
        out.iterations,
        out.elapsed_s,
        out.checkpoint.iteration,
        out.diverged_batches,
        a.out.display(),
        a.log.display()
    );
    Ok(())
}

fn write_text(path: &Path, text: &str) -> nss::Result<()> {
    std::fs::write(path, text).map_err(|e| nss::Error::Invalid(format!("{}: {e}", path.display())))
}

fn evaluate_cmd(a: EvaluateArgs) -> nss::Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let data = a.data.load()?;
    let report = evaluate_model(&ckpt, &data, a.init_policy, a.trace.is_some())?;
    write_text(&a.report, &report.to_json())?;
    if let Some(p) = &a.report_csv {
        write_text(p, &report.to_csv())?;
    }
    if let (Some(stem), Some(trace)) = (&a.trace, &report.trace) {
        trace.write(stem)?;
    }
    let channels: Vec<String> = report.per_channel.iter().map(|f| format!("{f:.4}")).collect();
    println!(
        "FIT {:.4} % over {} samples (per channel: {}); wrote {}",
        report.fit_percent,
        report.n_test,
        channels.join(", "),
        a.report.display()
    );
    Ok(())
}

fn campaign_cmd(a: CampaignArgs) -> nss::Result<()> {
    let mut file = CampaignFile::load(&a.config)?;
    if a.max_iters.is_some() {
        file.max_iters = a.max_iters;
    }
    let configs = file.configs()?;
    if a.dry_run {
        println!("{} runs", configs.len());
        return Ok(());
    }
    let data = file.data()?;
    let parallelism = a.parallelism.unwrap_or(file.parallelism);
    let result = run_campaign(&configs, &data, parallelism, &a.out_dir)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let ok = result.records.iter().filter(|r| r.status == nss::RunStatus::Ok).count();
    println!(
        "{} runs executed, {} already recorded, {ok} of {} records ok; wrote {}",
        result.executed,
        result.skipped,
        result.records.len(),
        a.out_dir.join(RESULTS_FILE).display()
    );
    Ok(())
}

fn analyze_cmd(a: AnalyzeArgs) -> nss::Result<()> {
    let path = if a.results.is_dir() { a.results.join(RESULTS_FILE) } else { a.results.clone() };
    let records = read_results(&path)?;
    let opts = ReportOptions { response: a.response, filter: a.filter, bins: a.bins, factors: a.factors };
    let written = write_report(&records, &opts, &a.out_dir)?;
    println!("{} records; wrote {} files to {}", records.len(), written.len(), a.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SynthData(a) => synth_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Campaign(a) => campaign_cmd(a),
        Command::Analyze(a) => analyze_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use nss_core::FactorGrid;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn design_grids_have_expected_sizes() {
        assert_eq!(FactorGrid::wiener_hammerstein().len(), 768);
        assert_eq!(FactorGrid::pick_and_place().len(), 432);
    }
}
