use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::read_summary;
use crate::error::{Error, Result};
use crate::training::MetricKind;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub run: String,
    pub group: String,
    pub seed: u64,
    pub metric: MetricKind,
    #[serde(rename = "final")]
    pub final_metric: f64,
    pub delta_vs_first: f64,
}

/// Per-group mean and sample standard deviation (0 for a single run).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub group: String,
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub metric: MetricKind,
    pub rows: Vec<ComparisonRow>,
    pub groups: Vec<GroupStats>,
}

/// Reads `summary.json` from two or more run directories. All runs must
/// report the same metric kind.
pub fn compare(run_dirs: &[PathBuf]) -> Result<Comparison> {
    if run_dirs.len() < 2 {
        return Err(Error::invalid("compare needs at least two run directories"));
    }
    let summaries = run_dirs
        .iter()
        .map(|d| read_summary(d))
        .collect::<Result<Vec<_>>>()?;
    let metric = summaries[0].metric;
    if let Some(i) = summaries.iter().position(|s| s.metric != metric) {
        return Err(Error::invalid(format!(
            "{} reports {:?} but {} reports {:?}",
            run_dirs[i].display(),
            summaries[i].metric,
            run_dirs[0].display(),
            metric
        )));
    }
    let first = summaries[0].final_metric;
    let rows: Vec<ComparisonRow> = run_dirs
        .iter()
        .zip(&summaries)
        .map(|(d, s)| ComparisonRow {
            run: d.display().to_string(),
            group: s.group.clone(),
            seed: s.seed,
            metric,
            final_metric: s.final_metric,
            delta_vs_first: s.final_metric - first,
        })
        .collect();

    let mut names: Vec<&str> = Vec::new();
    for r in &rows {
        if !names.contains(&r.group.as_str()) {
            names.push(&r.group);
        }
    }
    let groups = names
        .iter()
        .map(|g| {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.group == *g)
                .map(|r| r.final_metric)
                .collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            GroupStats {
                group: g.to_string(),
                runs: v.len(),
                mean,
                std,
            }
        })
        .collect();
    Ok(Comparison {
        metric,
        rows,
        groups,
    })
}

impl Comparison {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// `group  n  mean±std` in percent, one line per group.
    pub fn to_text(&self) -> String {
        let mut s = format!("metric: {:?}\n", self.metric);
        for g in &self.groups {
            let _ = writeln!(
                s,
                "{:<16} n={:<3} {:.2}±{:.2}",
                g.group,
                g.runs,
                100.0 * g.mean,
                100.0 * g.std
            );
        }
        s
    }
}

/// Writes `comparison.csv` and `comparison.txt` into `dir`.
pub fn write_comparison(cmp: &Comparison, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("comparison.csv");
    fs::write(&path, cmp.to_csv()?).map_err(|e| Error::io(&path, e))?;
    let path = dir.join("comparison.txt");
    fs::write(&path, cmp.to_text()).map_err(|e| Error::io(&path, e))
}
