use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{LoadSeries, Matrix, Timestamp, SECONDS_PER_DAY, SECONDS_PER_WEEK};
use crate::calendar::HolidaySet;
use crate::error::{Error, Result};

pub const N_FEATURES: usize = 10;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "load_week_before_w",
    "load_day_before_w",
    "temperature_c",
    "day_indicator",
    "weekend",
    "sin_week",
    "cos_week",
    "sin_day",
    "cos_day",
    "holiday",
];

/// Model inputs for one timestamp plus the load measured at it, when known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub lag_week_w: f64,
    pub lag_day_w: f64,
    pub temperature_c: f64,
    pub day_indicator: f64,
    pub weekend_flag: f64,
    pub holiday_flag: f64,
    pub sin_week: f64,
    pub cos_week: f64,
    pub sin_day: f64,
    pub cos_day: f64,
    pub target_w: Option<f64>,
}

impl FeatureRow {
    /// Inputs in [`FEATURE_NAMES`] order.
    pub fn features(&self) -> [f64; N_FEATURES] {
        [
            self.lag_week_w,
            self.lag_day_w,
            self.temperature_c,
            self.day_indicator,
            self.weekend_flag,
            self.sin_week,
            self.cos_week,
            self.sin_day,
            self.cos_day,
            self.holiday_flag,
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub timestamps: Vec<Timestamp>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn inputs(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows.len(), N_FEATURES);
        for (i, row) in self.rows.iter().enumerate() {
            m.row_mut(i).copy_from_slice(&row.features());
        }
        m
    }

    /// Targets of every row; fails if any row lacks one.
    pub fn targets(&self) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .zip(&self.timestamps)
            .map(|(r, &ts)| {
                r.target_w.ok_or(Error::Coverage {
                    what: "load target",
                    at: ts,
                })
            })
            .collect()
    }
}

/// Builds one row per grid step for `steps` steps starting at `from`.
///
/// The load series must reach back at least seven days before `from`; the
/// target is filled wherever the load series covers the timestamp.
pub fn build_features(
    load: &LoadSeries,
    temperature: &LoadSeries,
    holidays: &HolidaySet,
    from: Timestamp,
    steps: usize,
) -> Result<FeatureMatrix> {
    let first_feasible = load.start.plus(SECONDS_PER_WEEK);
    if from < first_feasible {
        return Err(Error::ColdStart { first_feasible });
    }
    let mut out = FeatureMatrix {
        timestamps: Vec::with_capacity(steps),
        rows: Vec::with_capacity(steps),
    };
    for k in 0..steps {
        let t = from.plus(k as i64 * load.step_seconds);
        out.timestamps.push(t);
        out.rows.push(feature_row(load, temperature, holidays, t)?);
    }
    Ok(out)
}

pub(crate) fn feature_row(
    load: &LoadSeries,
    temperature: &LoadSeries,
    holidays: &HolidaySet,
    t: Timestamp,
) -> Result<FeatureRow> {
    let lag = |seconds: i64| {
        let at = t.plus(-seconds);
        load.value_at(at).ok_or(Error::Coverage {
            what: "load history",
            at,
        })
    };
    let temperature_c = temperature.value_at(t).ok_or(Error::Coverage {
        what: "temperature",
        at: t,
    })?;
    let weekday = t.weekday();
    let day_phase = TAU * t.second_of_day() as f64 / SECONDS_PER_DAY as f64;
    let week_phase = TAU * t.second_of_week() as f64 / SECONDS_PER_WEEK as f64;
    Ok(FeatureRow {
        lag_week_w: lag(SECONDS_PER_WEEK)?,
        lag_day_w: lag(SECONDS_PER_DAY)?,
        temperature_c,
        day_indicator: f64::from(weekday),
        weekend_flag: if weekday >= 6 { 1.0 } else { 0.0 },
        holiday_flag: if holidays.contains(t.date()) { 1.0 } else { 0.0 },
        sin_week: week_phase.sin(),
        cos_week: week_phase.cos(),
        sin_day: day_phase.sin(),
        cos_day: day_phase.cos(),
        target_w: load.value_at(t),
    })
}
