//! Writes the analysis tables and figures for a results file into a directory.

use std::path::{Path, PathBuf};

use nss_core::Factor;

use crate::analysis::{
    attrition, attrition_csv, interactions, main_effects, replication_stats_of, Filter, Response,
};
use crate::campaign::RunRecord;
use crate::error::{Error, Result};
use crate::io::create_dir;
use crate::plot::{effects_svg, histogram_svg, interaction_svg};

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub response: Response,
    pub filter: Filter,
    pub bins: usize,
    /// Factors to analyse; empty means every factor with more than one observed level.
    pub factors: Vec<Factor>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { response: Response::FitPercent, filter: Filter::default(), bins: crate::analysis::DEFAULT_BINS, factors: Vec::new() }
    }
}

fn write(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Main effects and interactions per factor, replicate statistics with a
/// histogram and the attrition table. Returns the paths written.
pub fn write_report(records: &[RunRecord], opts: &ReportOptions, out_dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(out_dir)?;
    let mut written = Vec::new();
    let r = opts.response;
    let factors: Vec<Factor> = if opts.factors.is_empty() {
        Factor::ALL
            .into_iter()
            .filter(|&f| main_effects(records, r, f, &opts.filter).levels.len() > 1)
            .collect()
    } else {
        opts.factors.clone()
    };

    for &f in &factors {
        let table = main_effects(records, r, f, &opts.filter);
        write(out_dir, &format!("effects_{f}.csv"), &table.to_csv(), &mut written)?;
        write(out_dir, &format!("effects_{f}.svg"), &effects_svg(&table), &mut written)?;
    }
    for (i, &a) in factors.iter().enumerate() {
        for &b in &factors[i + 1..] {
            let table = interactions(records, r, a, b, &opts.filter);
            write(out_dir, &format!("interaction_{a}_{b}.csv"), &table.to_csv(), &mut written)?;
            write(out_dir, &format!("interaction_{a}_{b}.svg"), &interaction_svg(&table), &mut written)?;
        }
    }
    if let Ok(stats) = replication_stats_of(records, r, &opts.filter, opts.bins) {
        write(out_dir, "replication.csv", &stats.to_csv(), &mut written)?;
        write(out_dir, "histogram.csv", &stats.histogram.to_csv(), &mut written)?;
        write(out_dir, "histogram.svg", &histogram_svg(&stats.histogram, r.as_str(), Some(stats.mean)), &mut written)?;
    }
    let rows = attrition(records, Factor::EstType, &opts.filter);
    write(out_dir, "attrition.csv", &attrition_csv(Factor::EstType, &rows), &mut written)?;
    Ok(written)
}
