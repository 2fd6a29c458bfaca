//! Forecast error metrics over one horizon and their aggregation across
//! issuances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::Timestamp;

fn check(forecast: &[f64], actual: &[f64]) -> Result<()> {
    if forecast.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: forecast.len(),
            right: actual.len(),
        });
    }
    if forecast.is_empty() {
        return Err(Error::EmptyInput("forecast horizon"));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(forecast: &[f64], actual: &[f64]) -> Result<f64> {
    check(forecast, actual)?;
    let sum: f64 = forecast.iter().zip(actual).map(|(f, y)| (f - y).abs()).sum();
    Ok(sum / forecast.len() as f64)
}

/// Root mean squared error.
pub fn rmse(forecast: &[f64], actual: &[f64]) -> Result<f64> {
    check(forecast, actual)?;
    let sum: f64 = forecast.iter().zip(actual).map(|(f, y)| (f - y).powi(2)).sum();
    Ok((sum / forecast.len() as f64).sqrt())
}

/// Which value divides the residual in [`mape`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapeDenominator {
    /// `|(y' - y) / y'|`, normalized by the forecast.
    #[default]
    Forecast,
    /// `|(y' - y) / y|`, the conventional definition.
    Actual,
}

/// Mean absolute percentage error in percent and the number of steps
/// skipped because their denominator was zero.
pub fn mape(forecast: &[f64], actual: &[f64], mode: MapeDenominator) -> Result<(f64, usize)> {
    check(forecast, actual)?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for (&f, &y) in forecast.iter().zip(actual) {
        let denom = match mode {
            MapeDenominator::Forecast => f,
            MapeDenominator::Actual => y,
        };
        if denom == 0.0 {
            continue;
        }
        sum += ((f - y) / denom).abs();
        used += 1;
    }
    if used == 0 {
        return Err(Error::UndefinedMetric("every MAPE denominator is zero"));
    }
    Ok((100.0 * sum / used as f64, forecast.len() - used))
}

/// Mean absolute scaled error against the seven-day persistence forecast
/// `naive`. The denominator is `1/(h-1) * sum |y_t - y_{t-7d}|`, so the
/// persistence forecast itself scores `(h-1)/h`.
pub fn mase(forecast: &[f64], actual: &[f64], naive: &[f64]) -> Result<f64> {
    check(forecast, actual)?;
    if naive.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: naive.len(),
            right: actual.len(),
        });
    }
    let h = actual.len();
    if h < 2 {
        return Err(Error::UndefinedMetric("MASE needs a horizon of at least two steps"));
    }
    let naive_sum: f64 = actual.iter().zip(naive).map(|(y, n)| (y - n).abs()).sum();
    if naive_sum == 0.0 {
        return Err(Error::UndefinedMetric("actuals equal the seven-day lag everywhere"));
    }
    Ok(mae(forecast, actual)? / (naive_sum / (h - 1) as f64))
}

/// Errors of one forecast issuance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub issued_at: Timestamp,
    pub h: usize,
    pub mae_w: f64,
    pub rmse_w: f64,
    /// `None` when every denominator was zero.
    pub mape_pct: Option<f64>,
    /// `None` when the persistence reference is unavailable or degenerate.
    pub mase: Option<f64>,
}

impl ErrorReport {
    pub fn evaluate(
        issued_at: Timestamp,
        forecast: &[f64],
        actual: &[f64],
        naive: Option<&[f64]>,
        mape_mode: MapeDenominator,
    ) -> Result<Self> {
        Ok(ErrorReport {
            issued_at,
            h: forecast.len(),
            mae_w: mae(forecast, actual)?,
            rmse_w: rmse(forecast, actual)?,
            mape_pct: mape(forecast, actual, mape_mode).ok().map(|(v, _)| v),
            mase: naive.and_then(|n| mase(forecast, actual, n).ok()),
        })
    }
}

/// Arithmetic means over a set of issuances; optional metrics average
/// over the issuances where they are defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub issuances: usize,
    pub mae_w: f64,
    pub rmse_w: f64,
    pub mape_pct: Option<f64>,
    pub mase: Option<f64>,
}

pub fn aggregate(reports: &[ErrorReport]) -> Result<Aggregate> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("error reports"));
    }
    let n = reports.len() as f64;
    let opt_mean = |vals: Vec<f64>| (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
    Ok(Aggregate {
        issuances: reports.len(),
        mae_w: reports.iter().map(|r| r.mae_w).sum::<f64>() / n,
        rmse_w: reports.iter().map(|r| r.rmse_w).sum::<f64>() / n,
        mape_pct: opt_mean(reports.iter().filter_map(|r| r.mape_pct).collect()),
        mase: opt_mean(reports.iter().filter_map(|r| r.mase).collect()),
    })
}

/// Quartiles, 1.5 IQR whiskers and outliers of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Smallest datum not below `q1 - 1.5 IQR`.
    pub whisker_low: f64,
    /// Largest datum not above `q3 + 1.5 IQR`.
    pub whisker_high: f64,
    pub outliers: usize,
    pub count: usize,
}

/// Quantile by linear interpolation between closest ranks on sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn boxplot_summary(values: &[f64]) -> Result<BoxplotSummary> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if sorted.is_empty() {
        return Err(Error::EmptyInput("boxplot values"));
    }
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25);
    let median = quantile(&sorted, 0.5);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|v| (fence_lo..=fence_hi).contains(v))
        .collect();
    Ok(BoxplotSummary {
        q1,
        median,
        q3,
        whisker_low: inside.first().copied().unwrap_or(q1).min(q1),
        whisker_high: inside.last().copied().unwrap_or(q3).max(q3),
        outliers: sorted.len() - inside.len(),
        count: sorted.len(),
    })
}
