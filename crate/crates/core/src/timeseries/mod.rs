//! Uniform load series and the preprocessing applied before forecasting.
//!
//! Every timestamp is naive local time counted in seconds; a day is always
//! 86 400 s and daylight saving is not modelled.

mod correlation;
mod features;
mod matrix;
mod regularize;
mod scaler;

use std::fmt;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

pub use correlation::{monthly_correlation_report, pearson, CorrelationReport};
pub use features::{build_features, FeatureMatrix, FeatureRow, FEATURE_NAMES, N_FEATURES};
pub use matrix::Matrix;
pub use regularize::{regularize, regularize_with, resample, GapReport};
pub use scaler::{fit_scaler, ScalerParams};

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;
pub const SECONDS_PER_WEEK: i64 = 7 * SECONDS_PER_DAY;

/// Seconds since 1970-01-01 00:00 in naive local time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_datetime(dt: NaiveDateTime) -> Self {
        Timestamp(dt.and_utc().timestamp())
    }

    pub fn from_date(date: NaiveDate) -> Self {
        Self::from_datetime(date.and_hms_opt(0, 0, 0).expect("midnight is valid"))
    }

    pub fn from_ymd_hms(y: i32, m: u32, d: u32, hh: u32, mm: u32, ss: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(y, m, d)
            .and_then(|date| date.and_hms_opt(hh, mm, ss))
            .map(Self::from_datetime)
    }

    /// Accepts `YYYY-MM-DDTHH:MM[:SS]` (a space also separates date and time)
    /// or a bare date meaning midnight.
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        for fmt in [
            "%Y-%m-%dT%H:%M:%S",
            "%Y-%m-%d %H:%M:%S",
            "%Y-%m-%dT%H:%M",
            "%Y-%m-%d %H:%M",
        ] {
            if let Ok(dt) = NaiveDateTime::parse_from_str(text, fmt) {
                return Some(Self::from_datetime(dt));
            }
        }
        NaiveDate::parse_from_str(text, "%Y-%m-%d").ok().map(Self::from_date)
    }

    pub fn datetime(self) -> NaiveDateTime {
        DateTime::from_timestamp(self.0, 0)
            .expect("timestamp within chrono range")
            .naive_utc()
    }

    pub fn date(self) -> NaiveDate {
        self.datetime().date()
    }

    pub fn year(self) -> i32 {
        self.date().year()
    }

    pub fn month(self) -> u32 {
        self.date().month()
    }

    pub fn day(self) -> u32 {
        self.date().day()
    }

    /// Monday = 1 .. Sunday = 7.
    pub fn weekday(self) -> u32 {
        self.date().weekday().number_from_monday()
    }

    pub fn second_of_day(self) -> i64 {
        self.0.rem_euclid(SECONDS_PER_DAY)
    }

    /// Seconds since the most recent Monday 00:00.
    pub fn second_of_week(self) -> i64 {
        // 1970-01-01 was a Thursday, three days after a Monday.
        (self.0 + 3 * SECONDS_PER_DAY).rem_euclid(SECONDS_PER_WEEK)
    }

    pub fn midnight(self) -> Timestamp {
        Timestamp(self.0 - self.second_of_day())
    }

    pub fn hour(self) -> u32 {
        self.datetime().hour()
    }

    pub fn plus(self, seconds: i64) -> Timestamp {
        Timestamp(self.0 + seconds)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.datetime().format("%Y-%m-%dT%H:%M:%S"))
    }
}

/// Uniformly spaced power readings in watts; value `i` sits at
/// `start + i * step_seconds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSeries {
    pub start: Timestamp,
    pub step_seconds: i64,
    pub values: Vec<f64>,
}

impl LoadSeries {
    pub fn new(start: Timestamp, step_seconds: i64, values: Vec<f64>) -> Result<Self> {
        if step_seconds <= 0 {
            return Err(Error::Config(format!("step must be positive, got {step_seconds}")));
        }
        Ok(LoadSeries {
            start,
            step_seconds,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp_at(&self, index: usize) -> Timestamp {
        self.start.plus(index as i64 * self.step_seconds)
    }

    /// One past the last timestamp.
    pub fn end(&self) -> Timestamp {
        self.timestamp_at(self.values.len())
    }

    /// Index of a grid timestamp, `None` if off-grid or outside the series.
    pub fn index_of(&self, ts: Timestamp) -> Option<usize> {
        let offset = ts.0 - self.start.0;
        if offset < 0 || offset % self.step_seconds != 0 {
            return None;
        }
        let idx = (offset / self.step_seconds) as usize;
        (idx < self.values.len()).then_some(idx)
    }

    pub fn value_at(&self, ts: Timestamp) -> Option<f64> {
        self.index_of(ts).map(|i| self.values[i])
    }

    pub fn timestamps(&self) -> impl Iterator<Item = Timestamp> + '_ {
        (0..self.values.len()).map(|i| self.timestamp_at(i))
    }

    /// Readings with timestamps in `[from, to)`, clipped to the series.
    pub fn window(&self, from: Timestamp, to: Timestamp) -> LoadSeries {
        let lo = self.ceil_index(from);
        let hi = self.ceil_index(to).max(lo);
        LoadSeries {
            start: self.timestamp_at(lo),
            step_seconds: self.step_seconds,
            values: self.values[lo..hi].to_vec(),
        }
    }

    /// Readings strictly before `ts`.
    pub fn before(&self, ts: Timestamp) -> LoadSeries {
        self.window(self.start, ts)
    }

    fn ceil_index(&self, ts: Timestamp) -> usize {
        let offset = ts.0 - self.start.0;
        if offset <= 0 {
            return 0;
        }
        let idx = (offset + self.step_seconds - 1) / self.step_seconds;
        (idx as usize).min(self.values.len())
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Energy in kWh assuming constant power over each step.
    pub fn energy_kwh(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.step_seconds as f64 / 3.6e6
    }
}
