use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{Dataset, ForecasterLog, SimulationRun};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, boxplot_summary, Aggregate, BoxplotSummary};
use crate::timeseries::Timestamp;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Self-description of a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    /// Every output except the manifest and the files in `unstable`.
    pub outputs: Vec<FileDigest>,
    /// Outputs that differ between identical runs (wall-clock timings).
    pub unstable: Vec<String>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Manifest {
            tool: "loadcast".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            unstable: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: file_digest(path)?,
        });
        Ok(())
    }
}

/// Output directory that appears at its final path only when committed.
///
/// Files are written into a hidden sibling directory which is renamed into
/// place by [`RunDir::commit`]. An existing non-empty target is replaced
/// only with `overwrite`.
pub struct RunDir {
    target: PathBuf,
    staging: tempfile::TempDir,
    files: BTreeMap<String, String>,
    unstable: Vec<String>,
}

impl RunDir {
    pub fn create(target: &Path, overwrite: bool) -> Result<Self> {
        if target.exists() {
            let non_empty = target.read_dir().map_err(|e| Error::io(target, e))?.next().is_some();
            if non_empty && !overwrite {
                return Err(Error::Config(format!(
                    "output directory {} exists and is not empty; pass --overwrite to replace it",
                    target.display()
                )));
            }
        }
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        std::fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
        let staging = tempfile::Builder::new()
            .prefix(".loadcast-")
            .tempdir_in(&parent)
            .map_err(|e| Error::io(&parent, e))?;
        Ok(RunDir {
            target: target.to_path_buf(),
            staging,
            files: BTreeMap::new(),
            unstable: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.staging.path().join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Writes a file that is expected to differ between identical runs.
    pub fn write_unstable(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.staging.path().join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.unstable.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn has_file(&self, name: &str) -> bool {
        self.files.contains_key(name)
    }

    /// Writes `manifest.json` and moves the directory into place.
    pub fn commit(self, mut manifest: Manifest) -> Result<PathBuf> {
        manifest.outputs = self
            .files
            .iter()
            .map(|(name, sha)| FileDigest {
                path: name.clone(),
                sha256: sha.clone(),
            })
            .collect();
        manifest.unstable = self.unstable.clone();
        manifest.unstable.sort();
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.staging.path().join("manifest.json");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        if self.target.exists() {
            std::fs::remove_dir_all(&self.target).map_err(|e| Error::io(&self.target, e))?;
        }
        let staged = self.staging.keep();
        std::fs::rename(&staged, &self.target).map_err(|e| Error::io(&self.target, e))?;
        Ok(self.target)
    }
}

/// File-name-safe forecaster name (`ffnn:4x8` becomes `ffnn_4x8`).
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// `issued_at,h,mae_w,rmse_w,mape_pct,mase`, one row per issuance.
pub fn metrics_csv(log: &ForecasterLog) -> String {
    let mut out = String::from("issued_at,h,mae_w,rmse_w,mape_pct,mase\n");
    for r in &log.reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.issued_at,
            r.h,
            r.mae_w,
            r.rmse_w,
            opt(r.mape_pct),
            opt(r.mase)
        );
    }
    out
}

/// Kept forecasts next to the actuals: `issued_at,target_at,forecast_w,actual_w`.
pub fn forecasts_csv(log: &ForecasterLog, dataset: &Dataset, step: i64) -> String {
    let mut out = String::from("issued_at,target_at,forecast_w,actual_w\n");
    for f in &log.forecasts {
        for (k, v) in f.values.iter().enumerate() {
            let at = f.issued_at.plus(k as i64 * step);
            let _ = writeln!(out, "{},{},{},{}", f.issued_at, at, v, opt(dataset.load.value_at(at)));
        }
    }
    out
}

pub fn refits_csv(log: &ForecasterLog) -> String {
    let mut out = String::from("at,rows,first_row,last_row,scaler_fitted_at,epochs,best_loss\n");
    for r in &log.refits {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.at,
            r.rows,
            opt(r.first_row),
            opt(r.last_row),
            opt(r.scaler_fitted_at),
            opt(r.epochs),
            opt(r.best_loss)
        );
    }
    out
}

/// Consecutive abstentions with the same reason merged into spans.
pub fn abstentions_csv(log: &ForecasterLog, step: i64) -> String {
    let mut out = String::from("from,to,steps,reason\n");
    let mut span: Option<(Timestamp, Timestamp, usize, &str)> = None;
    let flush = |out: &mut String, s: (Timestamp, Timestamp, usize, &str)| {
        let _ = writeln!(out, "{},{},{},\"{}\"", s.0, s.1, s.2, s.3.replace('"', "'"));
    };
    for a in &log.abstentions {
        span = match span {
            Some((from, to, n, reason)) if reason == a.reason && a.at.0 == to.0 + step => {
                Some((from, a.at, n + 1, reason))
            }
            Some(s) => {
                flush(&mut out, s);
                Some((a.at, a.at, 1, &a.reason))
            }
            None => Some((a.at, a.at, 1, &a.reason)),
        };
    }
    if let Some(s) = span {
        flush(&mut out, s);
    }
    out
}

pub fn failures_csv(log: &ForecasterLog) -> String {
    let mut out = String::from("at,stage,message\n");
    for f in &log.failures {
        let _ = writeln!(out, "{},{},\"{}\"", f.at, f.stage, f.message.replace('"', "'"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterSummary {
    pub name: String,
    pub issuances: usize,
    pub abstentions: usize,
    pub failures: usize,
    pub refits: usize,
    pub fallback_issuances: usize,
    pub aggregate: Option<Aggregate>,
    pub boxplots: BTreeMap<String, BoxplotSummary>,
}

pub fn summarize(log: &ForecasterLog) -> ForecasterSummary {
    let mut boxplots = BTreeMap::new();
    let series: [(&str, Vec<f64>); 3] = [
        ("mae_w", log.reports.iter().map(|r| r.mae_w).collect()),
        ("rmse_w", log.reports.iter().map(|r| r.rmse_w).collect()),
        ("mase", log.reports.iter().filter_map(|r| r.mase).collect()),
    ];
    for (name, values) in series {
        if let Ok(b) = boxplot_summary(&values) {
            boxplots.insert(name.to_string(), b);
        }
    }
    ForecasterSummary {
        name: log.name.clone(),
        issuances: log.reports.len(),
        abstentions: log.abstentions.len(),
        failures: log.failures.len(),
        refits: log.refits.len(),
        fallback_issuances: log.issuances.iter().filter(|i| i.fallback).count(),
        aggregate: aggregate(&log.reports).ok(),
        boxplots,
    }
}

/// Daily mean MAE per forecaster: `date,<name>,...`.
pub fn daily_mae_csv(run: &SimulationRun) -> String {
    let mut table: BTreeMap<NaiveDate, Vec<Option<(f64, usize)>>> = BTreeMap::new();
    let n = run.forecasters.len();
    for (i, log) in run.forecasters.iter().enumerate() {
        for r in &log.reports {
            let row = table.entry(r.issued_at.date()).or_insert_with(|| vec![None; n]);
            let cell = row[i].get_or_insert((0.0, 0));
            cell.0 += r.mae_w;
            cell.1 += 1;
        }
    }
    let mut out = String::from("date");
    for log in &run.forecasters {
        out.push(',');
        out.push_str(&log.name);
    }
    out.push('\n');
    for (date, row) in table {
        out.push_str(&date.to_string());
        for cell in row {
            out.push(',');
            if let Some((sum, count)) = cell {
                out.push_str(&(sum / count as f64).to_string());
            }
        }
        out.push('\n');
    }
    out
}

pub fn boxplot_csv(summaries: &[ForecasterSummary]) -> String {
    let mut out = String::from("forecaster,metric,q1,median,q3,whisker_low,whisker_high,outliers,count\n");
    for s in summaries {
        for (metric, b) in &s.boxplots {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                s.name, metric, b.q1, b.median, b.q3, b.whisker_low, b.whisker_high, b.outliers, b.count
            );
        }
    }
    out
}

/// Writes every per-forecaster file plus `summary.json` and the plot data.
/// Returns the number of forecasters that issued at least once.
pub fn export_simulation(dir: &mut RunDir, run: &SimulationRun, dataset: &Dataset) -> Result<usize> {
    let mut summaries = Vec::new();
    let mut timings = String::from("forecaster,refit_at,seconds\n");
    for log in &run.forecasters {
        let stem = file_stem(&log.name);
        if !log.reports.is_empty() {
            dir.write(&format!("metrics_{stem}.csv"), metrics_csv(log).as_bytes())?;
        }
        if !log.forecasts.is_empty() {
            dir.write(
                &format!("forecasts_{stem}.csv"),
                forecasts_csv(log, dataset, run.step_seconds).as_bytes(),
            )?;
        }
        if !log.refits.is_empty() {
            dir.write(&format!("refits_{stem}.csv"), refits_csv(log).as_bytes())?;
        }
        if !log.abstentions.is_empty() {
            dir.write(
                &format!("abstentions_{stem}.csv"),
                abstentions_csv(log, run.step_seconds).as_bytes(),
            )?;
        }
        if !log.failures.is_empty() {
            dir.write(&format!("failures_{stem}.csv"), failures_csv(log).as_bytes())?;
        }
        for (r, s) in log.refits.iter().zip(&log.refit_seconds) {
            let _ = writeln!(timings, "{},{},{}", log.name, r.at, s);
        }
        summaries.push(summarize(log));
    }
    let active = summaries.iter().filter(|s| s.issuances > 0).count();
    if !run.forecasters.is_empty() {
        #[derive(Serialize)]
        struct Summary<'a> {
            start: Timestamp,
            steps: usize,
            step_s: i64,
            horizon_steps: usize,
            forecasters: &'a [ForecasterSummary],
        }
        dir.write_json(
            "summary.json",
            &Summary {
                start: run.start,
                steps: run.steps,
                step_s: run.step_seconds,
                horizon_steps: run.config.horizon_steps,
                forecasters: &summaries,
            },
        )?;
        dir.write("plot_daily_mae.csv", daily_mae_csv(run).as_bytes())?;
        dir.write("plot_boxplot.csv", boxplot_csv(&summaries).as_bytes())?;
        dir.write_unstable("refit_timings.csv", timings.as_bytes())?;
    }
    Ok(active)
}
