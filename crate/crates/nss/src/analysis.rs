//! Effects analysis over campaign results: per-level means with Student-t
//! intervals, two-factor cell means, replicate spread and attrition counts.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nss_core::{EstimatorKind, Factor};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::campaign::{RunRecord, RunStatus};
use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// Column of the results table being analysed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Response {
    FitPercent,
    ValLoss,
    WallS,
    Iters,
}

impl Response {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FitPercent => "fit_percent",
            Self::ValLoss => "val_loss",
            Self::WallS => "wall_s",
            Self::Iters => "iters",
        }
    }

    pub fn value(self, r: &RunRecord) -> Option<f64> {
        let v = match self {
            Self::FitPercent => r.fit_percent?,
            Self::ValLoss => r.val_loss?,
            Self::WallS => r.wall_s,
            Self::Iters => r.iters as f64,
        };
        v.is_finite().then_some(v)
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Response {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::FitPercent, Self::ValLoss, Self::WallS, Self::Iters]
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown response `{s}` (fit_percent, val_loss, wall_s, iters)")))
    }
}

/// Conjunction of `factor = level` conditions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Filter {
    pub conditions: Vec<(Factor, String)>,
}

fn same_level(a: &str, b: &str) -> bool {
    a == b || matches!((a.parse::<f64>(), b.parse::<f64>()), (Ok(x), Ok(y)) if x == y)
}

impl Filter {
    pub fn new(conditions: &[(Factor, &str)]) -> Self {
        Self { conditions: conditions.iter().map(|(f, l)| (*f, l.to_string())).collect() }
    }

    pub fn matches(&self, r: &RunRecord) -> bool {
        self.conditions.iter().all(|(f, level)| same_level(&r.level(*f), level))
    }
}

impl FromStr for Filter {
    type Err = Error;

    /// `max_time=3600,seq_fit_len=40`; an empty string keeps everything.
    fn from_str(s: &str) -> Result<Self> {
        let mut conditions = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (f, level) =
                part.split_once('=').ok_or_else(|| Error::Invalid(format!("filter term `{part}` is not factor=level")))?;
            conditions.push((f.trim().parse::<Factor>()?, level.trim().to_string()));
        }
        Ok(Self { conditions })
    }
}

/// Ok records passing `filter` that have a finite response, with that response.
fn retained<'a>(records: &'a [RunRecord], response: Response, filter: &Filter) -> Vec<(&'a RunRecord, f64)> {
    records
        .iter()
        .filter(|r| r.status == RunStatus::Ok && filter.matches(r))
        .filter_map(|r| response.value(r).map(|v| (r, v)))
        .collect()
}

/// Estimator kinds in declaration order, numbers numerically, anything else lexically.
pub fn sort_levels(factor: Factor, levels: &mut [String]) {
    let rank = |l: &String| -> (usize, f64) {
        if factor == Factor::EstType {
            if let Ok(k) = l.parse::<EstimatorKind>() {
                return (EstimatorKind::ALL.iter().position(|x| *x == k).unwrap_or(0), 0.0);
            }
        }
        (0, l.parse::<f64>().unwrap_or(f64::NAN))
    };
    levels.sort_by(|a, b| {
        let (ra, rb) = (rank(a), rank(b));
        ra.0.cmp(&rb.0).then(ra.1.total_cmp(&rb.1)).then(a.cmp(b))
    });
}

fn group(rows: &[(&RunRecord, f64)], factor: Factor) -> Vec<(String, Vec<f64>)> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (r, v) in rows {
        groups.entry(r.level(factor)).or_default().push(*v);
    }
    let mut levels: Vec<String> = groups.keys().cloned().collect();
    sort_levels(factor, &mut levels);
    levels.into_iter().map(|l| {
        let vals = groups.remove(&l).unwrap_or_default();
        (l, vals)
    }).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation with the `k - 1` denominator; `None` below two values.
pub fn sample_std(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = mean(v);
    Some((v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

/// Half-width `t_{0.975, k-1} s / sqrt(k)` of the 95% interval for the mean.
pub fn t_half_width(v: &[f64]) -> Option<f64> {
    let sd = sample_std(v)?;
    let k = v.len() as f64;
    let t = StudentsT::new(0.0, 1.0, k - 1.0).ok()?.inverse_cdf(0.975);
    Some(t * sd / k.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelEffect {
    pub level: String,
    pub mean: f64,
    pub count: usize,
    /// `None` when the level has fewer than two records.
    pub half_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectTable {
    pub factor: Factor,
    pub response: Response,
    pub levels: Vec<LevelEffect>,
}

impl EffectTable {
    pub fn total_count(&self) -> usize {
        self.levels.iter().map(|l| l.count).sum()
    }

    /// Count-weighted mean of the level means.
    pub fn grand_mean(&self) -> f64 {
        self.levels.iter().map(|l| l.mean * l.count as f64).sum::<f64>() / self.total_count() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("factor,level,count,mean,half_width,ci_low,ci_high\n");
        for l in &self.levels {
            let (hw, lo, hi) = match l.half_width {
                Some(h) => (fmt_f64(h), fmt_f64(l.mean - h), fmt_f64(l.mean + h)),
                None => Default::default(),
            };
            s.push_str(&format!("{},{},{},{},{hw},{lo},{hi}\n", self.factor, l.level, l.count, fmt_f64(l.mean)));
        }
        s
    }
}

/// Mean response per level of `factor` over the ok records passing `filter`.
pub fn main_effects(records: &[RunRecord], response: Response, factor: Factor, filter: &Filter) -> EffectTable {
    let rows = retained(records, response, filter);
    let levels = group(&rows, factor)
        .into_iter()
        .map(|(level, vals)| LevelEffect { level, mean: mean(&vals), count: vals.len(), half_width: t_half_width(&vals) })
        .collect();
    EffectTable { factor, response, levels }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTable {
    pub factor_a: Factor,
    pub factor_b: Factor,
    pub response: Response,
    pub levels_a: Vec<String>,
    pub levels_b: Vec<String>,
    /// `cells[i][j]` for `levels_a[i]`, `levels_b[j]`; `None` marks an empty cell.
    pub cells: Vec<Vec<Option<Cell>>>,
}

impl InteractionTable {
    pub fn cell(&self, a: &str, b: &str) -> Option<Cell> {
        let i = self.levels_a.iter().position(|l| l == a)?;
        let j = self.levels_b.iter().position(|l| l == b)?;
        self.cells[i][j]
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{},count,mean,empty\n", self.factor_a, self.factor_b);
        for (i, la) in self.levels_a.iter().enumerate() {
            for (j, lb) in self.levels_b.iter().enumerate() {
                match self.cells[i][j] {
                    Some(c) => s.push_str(&format!("{la},{lb},{},{},false\n", c.count, fmt_f64(c.mean))),
                    None => s.push_str(&format!("{la},{lb},0,,true\n")),
                }
            }
        }
        s
    }
}

/// Cell means over every observed pair of levels of `a` and `b`.
pub fn interactions(records: &[RunRecord], response: Response, a: Factor, b: Factor, filter: &Filter) -> InteractionTable {
    let rows = retained(records, response, filter);
    let levels_a: Vec<String> = group(&rows, a).into_iter().map(|(l, _)| l).collect();
    let levels_b: Vec<String> = group(&rows, b).into_iter().map(|(l, _)| l).collect();
    let mut sums = vec![vec![(0.0, 0usize); levels_b.len()]; levels_a.len()];
    for (r, v) in &rows {
        let i = levels_a.iter().position(|l| *l == r.level(a)).expect("level collected above");
        let j = levels_b.iter().position(|l| *l == r.level(b)).expect("level collected above");
        sums[i][j].0 += v;
        sums[i][j].1 += 1;
    }
    let cells = sums
        .into_iter()
        .map(|row| row.into_iter().map(|(s, n)| (n > 0).then(|| Cell { mean: s / n as f64, count: n })).collect())
        .collect();
    InteractionTable { factor_a: a, factor_b: b, response, levels_a, levels_b, cells }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `counts.len() + 1` bin edges; the last bin includes its upper edge.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 || values.is_empty() {
            return Err(Error::Invalid("histogram needs values and at least one bin".into()));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // identical values get a unit-wide range centred on them
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
        let mut counts = vec![0; bins];
        for v in values {
            let i = (((v - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Ok(Self { edges, counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_low,bin_high,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{},{},{c}\n", fmt_f64(self.edges[i]), fmt_f64(self.edges[i + 1])));
        }
        s
    }
}

pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    /// Three standard deviations: differences below this are within replicate noise.
    pub three_sigma: f64,
    pub histogram: Histogram,
}

impl ReplicationStats {
    pub fn to_csv(&self) -> String {
        format!(
            "count,mean,std,three_sigma\n{},{},{},{}\n",
            self.count,
            fmt_f64(self.mean),
            fmt_f64(self.std),
            fmt_f64(self.three_sigma)
        )
    }
}

pub fn replication_stats(values: &[f64], bins: usize) -> Result<ReplicationStats> {
    let std = sample_std(values).ok_or_else(|| Error::Invalid("replication statistics need at least two values".into()))?;
    Ok(ReplicationStats { count: values.len(), mean: mean(values), std, three_sigma: 3.0 * std, histogram: Histogram::new(values, bins)? })
}

/// Replication statistics of `response` over the ok records passing `filter`.
pub fn replication_stats_of(records: &[RunRecord], response: Response, filter: &Filter, bins: usize) -> Result<ReplicationStats> {
    let values: Vec<f64> = retained(records, response, filter).into_iter().map(|(_, v)| v).collect();
    replication_stats(&values, bins)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttritionRow {
    pub level: String,
    pub ok: usize,
    pub diverged: usize,
    pub infeasible: usize,
}

/// Status counts per level of `factor` over the records passing `filter`.
pub fn attrition(records: &[RunRecord], factor: Factor, filter: &Filter) -> Vec<AttritionRow> {
    let mut by_level: BTreeMap<String, AttritionRow> = BTreeMap::new();
    for r in records.iter().filter(|r| filter.matches(r)) {
        let level = r.level(factor);
        let row = by_level.entry(level.clone()).or_insert(AttritionRow { level, ok: 0, diverged: 0, infeasible: 0 });
        match r.status {
            RunStatus::Ok => row.ok += 1,
            RunStatus::Diverged => row.diverged += 1,
            RunStatus::Infeasible => row.infeasible += 1,
        }
    }
    let mut levels: Vec<String> = by_level.keys().cloned().collect();
    sort_levels(factor, &mut levels);
    levels.into_iter().filter_map(|l| by_level.remove(&l)).collect()
}

pub fn attrition_csv(factor: Factor, rows: &[AttritionRow]) -> String {
    let mut s = format!("{factor},ok,diverged,infeasible\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.level, r.ok, r.diverged, r.infeasible));
    }
    s
}
