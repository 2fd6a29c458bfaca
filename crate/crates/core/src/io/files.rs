use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calendar::HolidaySet;
use crate::engine::Dataset;
use crate::error::{Error, Result};
use crate::timeseries::{regularize, regularize_with, resample, GapReport, LoadSeries, Timestamp};

pub const LOAD_HEADER: [&str; 2] = ["timestamp", "power_w"];
pub const TEMPERATURE_HEADER: [&str; 2] = ["timestamp", "temp_c"];

/// Reads `timestamp,<value>` rows. Empty values become NaN (missing);
/// anything else that does not parse is an error carrying the line number.
pub fn read_series_csv(reader: impl Read, header: [&str; 2], path: &Path) -> Result<Vec<(Timestamp, f64)>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if found.len() != 2 || found[0] != *header[0] || found[1] != *header[1] {
        return Err(parse_err(1, format!("expected header {},{}", header[0], header[1])));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let ts =
            Timestamp::parse(&record[0]).ok_or_else(|| parse_err(line, format!("bad timestamp {:?}", &record[0])))?;
        let value = match &record[1] {
            "" => f64::NAN,
            text => text
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("bad value {text:?}")))?,
        };
        out.push((ts, value));
    }
    if out.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    Ok(out)
}

pub fn read_series_file(path: &Path, header: [&str; 2]) -> Result<Vec<(Timestamp, f64)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_series_csv(std::io::BufReader::new(file), header, path)
}

pub fn write_series_csv(mut writer: impl Write, header: [&str; 2], series: &LoadSeries) -> std::io::Result<()> {
    writeln!(writer, "{},{}", header[0], header[1])?;
    for (ts, v) in series.timestamps().zip(&series.values) {
        writeln!(writer, "{ts},{v}")?;
    }
    Ok(())
}

pub fn read_holidays(path: &Path) -> Result<HolidaySet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    HolidaySet::parse(&text).map_err(|(line, message)| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })
}

/// Data-quality figures of one raw file, in percent of the grid slots at
/// the file's native step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub rows: usize,
    pub native_step_s: i64,
    pub slots: usize,
    /// Grid slots without any reading.
    pub missing_pct: f64,
    /// Readings repeating an earlier timestamp.
    pub double_pct: f64,
    /// Readings that are non-finite or negative.
    pub incorrect_pct: f64,
    /// Readings between grid slots.
    pub off_grid: usize,
    pub reordered: bool,
    pub longest_gap_slots: usize,
}

/// Most frequent positive spacing between consecutive distinct timestamps.
pub fn infer_step(raw: &[(Timestamp, f64)]) -> Result<i64> {
    let mut ts: Vec<i64> = raw.iter().map(|(t, _)| t.0).collect();
    ts.sort_unstable();
    ts.dedup();
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for w in ts.windows(2) {
        *counts.entry(w[1] - w[0]).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(step, _)| step)
        .ok_or(Error::EmptyInput("need at least two distinct timestamps"))
}

pub fn quality_report(raw: &[(Timestamp, f64)], step: i64, gaps: &GapReport) -> QualityReport {
    let start = raw.iter().map(|(t, _)| t.0).min().unwrap_or(0);
    let mut on_grid: Vec<i64> = raw
        .iter()
        .map(|(t, _)| t.0)
        .filter(|t| (t - start) % step == 0)
        .collect();
    let off_grid = raw.len() - on_grid.len();
    on_grid.sort_unstable();
    on_grid.dedup();
    let pct = |n: usize| 100.0 * n as f64 / gaps.slots.max(1) as f64;
    QualityReport {
        rows: raw.len(),
        native_step_s: step,
        slots: gaps.slots,
        missing_pct: pct(gaps.slots - on_grid.len()),
        double_pct: pct(gaps.duplicates),
        incorrect_pct: pct(gaps.invalid),
        off_grid,
        reordered: gaps.reordered,
        longest_gap_slots: gaps.longest_gap,
    }
}

/// Puts raw readings on a `step`-second grid: regularized at their native
/// step, then averaged down to `step` or linearly interpolated up to it.
pub fn to_grid(raw: &[(Timestamp, f64)], step: i64) -> Result<(LoadSeries, QualityReport)> {
    let native = infer_step(raw)?;
    if native < step && step % native == 0 {
        let (series, gaps) = regularize(raw, native)?;
        let q = quality_report(raw, native, &gaps);
        Ok((resample(&series, step)?, q))
    } else if native == step || native % step == 0 {
        let (series, gaps) = regularize(raw, native)?;
        let q = quality_report(raw, native, &gaps);
        if native == step {
            return Ok((series, q));
        }
        let (fine, _) = regularize(
            &series
                .timestamps()
                .zip(series.values.iter().copied())
                .collect::<Vec<_>>(),
            step,
        )?;
        Ok((fine, q))
    } else {
        Err(Error::StepRatio { from: native, to: step })
    }
}

/// Samples `source` at every timestamp of `grid` by linear interpolation.
/// Up to one source step beyond either end is held at the edge value.
pub fn align_to(source: &LoadSeries, grid: &LoadSeries) -> Result<LoadSeries> {
    let step = source.step_seconds;
    let last = source.timestamp_at(source.len() - 1);
    let mut values = Vec::with_capacity(grid.len());
    for t in grid.timestamps() {
        if t.0 < source.start.0 - step || t.0 > last.0 + step {
            return Err(Error::Coverage {
                what: "temperature series",
                at: t,
            });
        }
        let offset = (t.0 - source.start.0) as f64 / step as f64;
        let v = if offset <= 0.0 {
            source.values[0]
        } else if offset >= (source.len() - 1) as f64 {
            source.values[source.len() - 1]
        } else {
            let i = offset.floor() as usize;
            let frac = offset - i as f64;
            source.values[i] + (source.values[i + 1] - source.values[i]) * frac
        };
        values.push(v);
    }
    LoadSeries::new(grid.start, grid.step_seconds, values)
}

/// Quality figures for both input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub load: QualityReport,
    pub temperature: Option<QualityReport>,
    pub holidays: usize,
    pub warnings: Vec<String>,
}

/// Reads, validates and aligns the input files onto a `step`-second grid.
/// Without a temperature file the temperature feature is constant zero.
pub fn ingest(
    load: &Path,
    temperature: Option<&Path>,
    holidays: Option<&Path>,
    step: i64,
) -> Result<(Dataset, IngestReport)> {
    let raw = read_series_file(load, LOAD_HEADER)?;
    let (load_series, load_q) = to_grid(&raw, step).map_err(|e| match e {
        Error::EmptyInput(m) => Error::Parse {
            path: load.to_path_buf(),
            line: 0,
            message: m.into(),
        },
        other => other,
    })?;
    let mut warnings = Vec::new();
    let (temp, temp_q) = match temperature {
        Some(path) => {
            let raw_t = read_temperature(path)?;
            let native = infer_step(&raw_t)?;
            let (t_series, gaps) = regularize_any(&raw_t, native)?;
            (
                align_to(&t_series, &load_series)?,
                Some(quality_report(&raw_t, native, &gaps)),
            )
        }
        None => {
            warnings.push("no temperature file; temperature feature is constant".into());
            (
                LoadSeries::new(load_series.start, step, vec![0.0; load_series.len()])?,
                None,
            )
        }
    };
    let holidays = match holidays {
        Some(p) => read_holidays(p)?,
        None => HolidaySet::default(),
    };
    let report = IngestReport {
        load: load_q,
        temperature: temp_q,
        holidays: holidays.len(),
        warnings,
    };
    Ok((Dataset::new(load_series, temp, holidays)?, report))
}

fn read_temperature(path: &Path) -> Result<Vec<(Timestamp, f64)>> {
    read_series_file(path, TEMPERATURE_HEADER)
}

/// Like [`regularize`] but keeps negative readings, which are valid
/// temperatures.
fn regularize_any(raw: &[(Timestamp, f64)], step: i64) -> Result<(LoadSeries, GapReport)> {
    regularize_with(raw, step, f64::is_finite)
}
