//! Open-loop test simulation and FIT reporting.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nss_core::fit::fit_summary;
use nss_core::Dataset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// How the test rollout gets its initial state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum InitPolicy {
    #[default]
    /// The checkpoint's estimator on the first `m_e` test samples; those are not scored.
    Estimator,
    /// Zero state at sample 0, scoring from sample `skip` on.
    ZeroFull { skip: usize },
}

impl fmt::Display for InitPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Estimator => f.write_str("estimator"),
            Self::ZeroFull { skip } => write!(f, "zero-full:{skip}"),
        }
    }
}

impl FromStr for InitPolicy {
    type Err = Error;

    /// `estimator`, `zero-full` or `zero-full:<skip>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "estimator" => Ok(Self::Estimator),
            None if s == "zero-full" => Ok(Self::ZeroFull { skip: 0 }),
            Some(("zero-full", skip)) => skip
                .parse()
                .map(|skip| Self::ZeroFull { skip })
                .map_err(|_| Error::Invalid(format!("bad skip count in `{s}`"))),
            _ => Err(Error::Invalid(format!("unknown init policy `{s}` (estimator, zero-full[:skip])"))),
        }
    }
}

/// Scored samples in physical units, row-major with `n_y` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub n_y: usize,
    /// Sample index of each row in the test record.
    pub t: Vec<usize>,
    pub y: Vec<f64>,
    pub y_sim: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    /// FIT of the stacked residuals; equal to the single channel's FIT when `n_y = 1`.
    pub fit_percent: f64,
    pub per_channel: Vec<f64>,
    pub rmse: Vec<f64>,
    pub n_test: usize,
    pub first_scored: usize,
    pub policy: InitPolicy,
    #[serde(skip)]
    pub trace: Option<Trace>,
}

/// Simulates the checkpoint over `test` (physical units) and scores it.
pub fn evaluate_model(ckpt: &Checkpoint, test: &Dataset, policy: InitPolicy, keep_trace: bool) -> Result<FitReport> {
    let spec = ckpt.model_spec;
    if test.n_u() != spec.n_u || test.n_y() != spec.n_y {
        return Err(Error::Invalid(format!(
            "test data has {} inputs and {} outputs, model expects {} and {}",
            test.n_u(),
            test.n_y(),
            spec.n_u,
            spec.n_y
        )));
    }
    let model = ckpt.model()?;
    let norm = ckpt.normalizer.normalize(test)?;
    let n = test.len();
    let (x0, first) = match policy {
        InitPolicy::Estimator => {
            let est = ckpt.estimator()?;
            let m_e = est.m_e;
            if n <= m_e {
                return Err(nss_core::Error::InfeasibleSplit { len: n, needed: m_e + 1 }.into());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(ckpt.rng_digest);
            let x0 = est.estimate(&ckpt.params, &model, norm.u_rows(0, m_e), norm.y_rows(0, m_e), &mut rng)?;
            (x0, m_e)
        }
        InitPolicy::ZeroFull { skip } => {
            if skip >= n {
                return Err(Error::Invalid(format!("cannot skip {skip} of {n} test samples")));
            }
            (vec![0.0; spec.n_x], 0)
        }
    };
    let traj = model.simulate(&ckpt.params, &x0, norm.u_rows(first, n - first - 1))?;
    let skip = match policy {
        InitPolicy::ZeroFull { skip } => skip,
        InitPolicy::Estimator => 0,
    };
    let n_y = spec.n_y;
    let y_sim = ckpt.normalizer.denormalize_y(&traj.outputs[skip * n_y..]);
    let scored_from = first + skip;
    let y = test.y_rows(scored_from, n - scored_from);
    let summary = fit_summary(y, &y_sim, n_y)?;
    let trace = keep_trace.then(|| Trace { n_y, t: (scored_from..n).collect(), y: y.to_vec(), y_sim: y_sim.clone() });
    Ok(FitReport {
        fit_percent: summary.stacked,
        per_channel: summary.per_channel,
        rmse: summary.rmse,
        n_test: n - scored_from,
        first_scored: scored_from,
        policy,
        trace,
    })
}

impl FitReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One header row and one value row.
    pub fn to_csv(&self) -> String {
        let mut head = vec!["policy".to_string(), "n_test".into(), "first_scored".into(), "fit_percent".into()];
        let mut row = vec![self.policy.to_string(), self.n_test.to_string(), self.first_scored.to_string(), fmt_f64(self.fit_percent)];
        for (c, (fit, rmse)) in self.per_channel.iter().zip(&self.rmse).enumerate() {
            head.push(format!("fit_y{c}"));
            head.push(format!("rmse_y{c}"));
            row.push(fmt_f64(*fit));
            row.push(fmt_f64(*rmse));
        }
        format!("{}\n{}\n", head.join(","), row.join(","))
    }
}

impl Trace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// CSV `t,y,y_sim,error` for one output channel.
    pub fn channel_csv(&self, c: usize) -> String {
        let mut text = String::from("t,y,y_sim,error\n");
        for (k, t) in self.t.iter().enumerate() {
            let (y, s) = (self.y[k * self.n_y + c], self.y_sim[k * self.n_y + c]);
            text.push_str(&format!("{t},{},{},{}\n", fmt_f64(y), fmt_f64(s), fmt_f64(y - s)));
        }
        text
    }

    /// Writes `<stem>_y<c>.csv` per channel and returns the paths.
    pub fn write(&self, stem: &Path) -> Result<Vec<PathBuf>> {
        (0..self.n_y)
            .map(|c| {
                let mut name = stem.file_name().map(|s| s.to_os_string()).unwrap_or_default();
                name.push(format!("_y{c}.csv"));
                let path = stem.with_file_name(name);
                std::fs::write(&path, self.channel_csv(c)).map_err(|e| Error::io(&path, e))?;
                Ok(path)
            })
            .collect()
    }
}
