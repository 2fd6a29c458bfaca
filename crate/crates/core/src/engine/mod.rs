//! Rolling-origin simulation.
//!
//! At every grid step `t` each forecaster may refit on data strictly before
//! `t` and then issues a forecast for `[t, t + horizon)`. Forecasts are
//! scored against the actuals and kept in a per-forecaster log.

mod adaptation;
mod forecasters;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use adaptation::{adaptation_report, AdaptationThresholds, DailyError, EventTrajectory, Phase};
pub use forecasters::{
    build_forecaster, cold_start_policy, ForecasterKind, LastValueForecaster, NeuralForecaster, PslpForecaster,
    Readiness, SlpForecaster,
};

use crate::calendar::HolidaySet;
use crate::error::{Error, Result};
use crate::metrics::{ErrorReport, MapeDenominator};
use crate::neural::{NetworkConfig, TrainConfig};
use crate::timeseries::{LoadSeries, Timestamp, SECONDS_PER_DAY, SECONDS_PER_WEEK};

/// Load, temperature on the same grid, and holidays.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub load: LoadSeries,
    pub temperature: LoadSeries,
    pub holidays: HolidaySet,
}

impl Dataset {
    pub fn new(load: LoadSeries, temperature: LoadSeries, holidays: HolidaySet) -> Result<Self> {
        if load.is_empty() {
            return Err(Error::EmptyInput("load series"));
        }
        if temperature.step_seconds != load.step_seconds {
            return Err(Error::Config(format!(
                "temperature step {} s differs from load step {} s",
                temperature.step_seconds, load.step_seconds
            )));
        }
        Ok(Dataset {
            load,
            temperature,
            holidays,
        })
    }
}

/// When a forecaster retrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefitCadence {
    EveryStep,
    /// Once a day at this second of the day.
    Daily(i64),
    /// Every `n` grid steps.
    Steps(usize),
}

impl RefitCadence {
    /// Whether a refit is due at `now` given the previous one. The first
    /// refit is always due.
    pub fn due(self, last: Option<Timestamp>, now: Timestamp, step_seconds: i64) -> bool {
        let Some(last) = last else { return true };
        match self {
            RefitCadence::EveryStep => now > last,
            RefitCadence::Daily(sod) => {
                let mut next = last.midnight().plus(sod);
                if next <= last {
                    next = next.plus(SECONDS_PER_DAY);
                }
                next <= now
            }
            RefitCadence::Steps(n) => now.0 - last.0 >= n as i64 * step_seconds,
        }
    }

    fn validate(self, step_seconds: i64) -> Result<()> {
        match self {
            RefitCadence::Daily(sod) if !(0..SECONDS_PER_DAY).contains(&sod) || sod % step_seconds != 0 => Err(
                Error::Config(format!("daily refit time must be a grid second of the day, got {sod}")),
            ),
            RefitCadence::Steps(0) => Err(Error::Config("refit interval must be at least one step".into())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for RefitCadence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefitCadence::EveryStep => f.write_str("step"),
            RefitCadence::Daily(sod) => write!(f, "daily@{:02}:{:02}", sod / 3600, sod % 3600 / 60),
            RefitCadence::Steps(n) => write!(f, "every:{n}"),
        }
    }
}

/// Parses `step`, `daily` (midnight), `daily@HH:MM` or `every:N` (steps).
impl FromStr for RefitCadence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "cannot parse refit cadence {s:?}; expected step, daily@HH:MM or every:N"
            ))
        };
        match s {
            "step" => return Ok(RefitCadence::EveryStep),
            "daily" => return Ok(RefitCadence::Daily(0)),
            _ => {}
        }
        if let Some(at) = s.strip_prefix("daily@") {
            let (h, m) = at.split_once(':').ok_or_else(bad)?;
            let h: i64 = h.parse().map_err(|_| bad())?;
            let m: i64 = m.parse().map_err(|_| bad())?;
            if !(0..24).contains(&h) || !(0..60).contains(&m) {
                return Err(bad());
            }
            return Ok(RefitCadence::Daily(h * 3600 + m * 60));
        }
        if let Some(n) = s.strip_prefix("every:") {
            return Ok(RefitCadence::Steps(n.parse().map_err(|_| bad())?));
        }
        Err(bad())
    }
}

/// Forecaster roster entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForecasterSpec {
    Slp,
    Pslp,
    Neural(NetworkConfig),
    /// Repeats the last observed value; a reference for tests.
    LastValue,
}

impl fmt::Display for ForecasterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForecasterSpec::Slp => f.write_str("slp"),
            ForecasterSpec::Pslp => f.write_str("pslp"),
            ForecasterSpec::Neural(c) => write!(f, "{c}"),
            ForecasterSpec::LastValue => f.write_str("last"),
        }
    }
}

impl FromStr for ForecasterSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "slp" => Ok(ForecasterSpec::Slp),
            "pslp" => Ok(ForecasterSpec::Pslp),
            "last" => Ok(ForecasterSpec::LastValue),
            _ => Ok(ForecasterSpec::Neural(s.parse()?)),
        }
    }
}

macro_rules! serde_as_string {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_as_string!(RefitCadence);
serde_as_string!(ForecasterSpec);

/// Which issued forecasts the run keeps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeepForecasts {
    None,
    /// Only forecasts issued at midnight (day-ahead view).
    #[default]
    Midnight,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub step_s: i64,
    pub horizon_steps: usize,
    pub window_days: i64,
    pub nn_refit: RefitCadence,
    pub pslp_refit: RefitCadence,
    pub forecasters: Vec<ForecasterSpec>,
    pub seed: u64,
    /// First issuance; defaults to seven days after the data start.
    pub start: Option<Timestamp>,
    /// Number of issuances; defaults to every step whose horizon has actuals.
    pub steps: Option<usize>,
    /// Neural forecasters wait until this many training rows exist.
    pub min_training_rows: usize,
    /// Annual consumption for the SLP; estimated from the data mean if unset.
    pub slp_annual_kwh: Option<f64>,
    pub mape_denominator: MapeDenominator,
    pub keep_forecasts: KeepForecasts,
    pub train: TrainConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            step_s: 300,
            horizon_steps: 288,
            window_days: 60,
            nn_refit: RefitCadence::Daily(0),
            pslp_refit: RefitCadence::Daily(12 * 3600),
            forecasters: vec![ForecasterSpec::Slp, ForecasterSpec::Pslp],
            seed: 0,
            start: None,
            steps: None,
            min_training_rows: 288,
            slp_annual_kwh: None,
            mape_denominator: MapeDenominator::default(),
            keep_forecasts: KeepForecasts::default(),
            train: TrainConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn window_seconds(&self) -> i64 {
        self.window_days * SECONDS_PER_DAY
    }

    pub fn horizon_seconds(&self) -> i64 {
        self.horizon_steps as i64 * self.step_s
    }

    pub fn validate(&self) -> Result<()> {
        if self.step_s <= 0 || SECONDS_PER_DAY % self.step_s != 0 {
            return Err(Error::Config(format!("step must divide a day, got {} s", self.step_s)));
        }
        if self.horizon_steps == 0 || self.horizon_seconds() > SECONDS_PER_DAY {
            return Err(Error::Config(format!(
                "horizon must be 1 step to 24 h so the day-before lag stays observed, got {} steps",
                self.horizon_steps
            )));
        }
        if self.window_seconds() < SECONDS_PER_WEEK + self.horizon_seconds() {
            return Err(Error::Config(format!(
                "window of {} days is shorter than seven days plus the horizon",
                self.window_days
            )));
        }
        self.nn_refit.validate(self.step_s)?;
        self.pslp_refit.validate(self.step_s)?;
        if let Some(kwh) = self.slp_annual_kwh {
            if !(kwh > 0.0 && kwh.is_finite()) {
                return Err(Error::Config(format!(
                    "SLP annual consumption must be positive, got {kwh}"
                )));
            }
        }
        for f in &self.forecasters {
            if let ForecasterSpec::Neural(c) = f {
                c.validate()?;
            }
        }
        self.train.validate()
    }
}

/// Read-only view handed to a forecaster at one step.
pub struct StepContext<'a> {
    pub now: Timestamp,
    pub config: &'a EngineConfig,
    pub temperature: &'a LoadSeries,
    pub holidays: &'a HolidaySet,
    /// First timestamp of the available load data.
    pub data_start: Timestamp,
    load: &'a LoadSeries,
}

impl StepContext<'_> {
    /// Load readings in `[from, now)`.
    pub fn history(&self, from: Timestamp) -> LoadSeries {
        self.load.window(from, self.now)
    }

    /// The most recent reading before `now`.
    pub fn last_value(&self) -> Option<f64> {
        self.load.value_at(self.now.plus(-self.load.step_seconds))
    }
}

/// One completed retraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefitRecord {
    pub at: Timestamp,
    pub rows: usize,
    pub first_row: Option<Timestamp>,
    /// Latest timestamp among the training targets.
    pub last_row: Option<Timestamp>,
    /// When the scalers used from now on were fitted.
    pub scaler_fitted_at: Option<Timestamp>,
    pub epochs: Option<usize>,
    pub best_loss: Option<f64>,
}

/// What a forecaster produced at one step.
#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    Forecast {
        values: Vec<f64>,
        /// Time of the refit whose state produced the forecast.
        fitted_at: Option<Timestamp>,
        fallback: bool,
    },
    Abstain(String),
}

pub trait Forecaster: Send {
    fn name(&self) -> String;

    /// Retrains if due. Returns a record when training took place.
    fn refit(&mut self, ctx: &StepContext<'_>) -> Result<Option<RefitRecord>>;

    fn forecast(&self, ctx: &StepContext<'_>) -> Result<Issue>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issuance {
    pub issued_at: Timestamp,
    pub fitted_at: Option<Timestamp>,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abstention {
    pub at: Timestamp,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub at: Timestamp,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredForecast {
    pub issued_at: Timestamp,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterLog {
    pub name: String,
    /// One per issuance, aligned with `issuances`.
    pub reports: Vec<ErrorReport>,
    pub issuances: Vec<Issuance>,
    pub abstentions: Vec<Abstention>,
    pub failures: Vec<Failure>,
    pub refits: Vec<RefitRecord>,
    pub forecasts: Vec<StoredForecast>,
    /// Wall-clock seconds per refit; not part of the reproducible output.
    #[serde(skip)]
    pub refit_seconds: Vec<f64>,
}

impl ForecasterLog {
    fn new(name: String) -> Self {
        ForecasterLog {
            name,
            reports: Vec::new(),
            issuances: Vec::new(),
            abstentions: Vec::new(),
            failures: Vec::new(),
            refits: Vec::new(),
            forecasts: Vec::new(),
            refit_seconds: Vec::new(),
        }
    }

    /// The forecast issued at `at`, if it was kept.
    pub fn forecast_at(&self, at: Timestamp) -> Option<&[f64]> {
        self.forecasts
            .binary_search_by_key(&at, |f| f.issued_at)
            .ok()
            .map(|i| &self.forecasts[i].values[..])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    pub config: EngineConfig,
    pub start: Timestamp,
    pub steps: usize,
    pub step_seconds: i64,
    pub forecasters: Vec<ForecasterLog>,
}

impl SimulationRun {
    pub fn issuance_times(&self) -> impl Iterator<Item = Timestamp> + '_ {
        (0..self.steps).map(|k| self.start.plus(k as i64 * self.step_seconds))
    }

    pub fn log(&self, name: &str) -> Option<&ForecasterLog> {
        self.forecasters.iter().find(|f| f.name == name)
    }
}

/// Issuance span implied by the config and the data.
fn issuance_span(dataset: &Dataset, config: &EngineConfig) -> Result<(Timestamp, usize)> {
    let load = &dataset.load;
    let start = config.start.unwrap_or(load.start.plus(SECONDS_PER_WEEK));
    if load.index_of(start).is_none() {
        return Err(Error::Coverage {
            what: "load series",
            at: start,
        });
    }
    let last_issuable = load.end().0 - config.horizon_seconds();
    if last_issuable < start.0 {
        return Err(Error::Coverage {
            what: "load series (horizon after the first issuance)",
            at: start.plus(config.horizon_seconds()),
        });
    }
    let feasible = ((last_issuable - start.0) / config.step_s + 1) as usize;
    let steps = match config.steps {
        Some(n) if n > feasible => {
            return Err(Error::Coverage {
                what: "load series (requested steps)",
                at: start.plus((n as i64 - 1) * config.step_s + config.horizon_seconds()),
            })
        }
        Some(n) => n,
        None => feasible,
    };
    Ok((start, steps))
}

/// Builds the configured roster and runs it.
pub fn run_configured(dataset: &Dataset, config: &EngineConfig) -> Result<SimulationRun> {
    config.validate()?;
    let mut roster = config
        .forecasters
        .iter()
        .map(|spec| build_forecaster(*spec, dataset, config))
        .collect::<Result<Vec<_>>>()?;
    run(dataset, config, &mut roster)
}

/// Runs the rolling simulation with caller-supplied forecasters.
pub fn run(dataset: &Dataset, config: &EngineConfig, forecasters: &mut [Box<dyn Forecaster>]) -> Result<SimulationRun> {
    config.validate()?;
    if dataset.load.step_seconds != config.step_s {
        return Err(Error::Config(format!(
            "data step {} s differs from configured step {} s",
            dataset.load.step_seconds, config.step_s
        )));
    }
    let (start, steps) = issuance_span(dataset, config)?;
    let load = &dataset.load;
    let h = config.horizon_steps;
    let mut logs: Vec<ForecasterLog> = forecasters.iter().map(|f| ForecasterLog::new(f.name())).collect();

    for k in 0..steps {
        let now = start.plus(k as i64 * config.step_s);
        let ctx = StepContext {
            now,
            config,
            temperature: &dataset.temperature,
            holidays: &dataset.holidays,
            data_start: load.start,
            load,
        };
        let outcomes: Vec<_> = forecasters
            .par_iter_mut()
            .map(|f| {
                let clock = Instant::now();
                let refit = f.refit(&ctx);
                let elapsed = clock.elapsed().as_secs_f64();
                let issue = f.forecast(&ctx);
                (refit, elapsed, issue)
            })
            .collect();

        let first = load.index_of(now).expect("issuance inside the load series");
        let actual = &load.values[first..first + h];
        let naive: Option<Vec<f64>> = (0..h)
            .map(|j| load.value_at(now.plus(j as i64 * config.step_s - SECONDS_PER_WEEK)))
            .collect();

        for (log, (refit, elapsed, issue)) in logs.iter_mut().zip(outcomes) {
            match refit {
                Ok(Some(record)) => {
                    log.refits.push(record);
                    log.refit_seconds.push(elapsed);
                }
                Ok(None) => {}
                Err(e) => log.failures.push(Failure {
                    at: now,
                    stage: "refit".into(),
                    message: e.to_string(),
                }),
            }
            match issue {
                Ok(Issue::Forecast {
                    values,
                    fitted_at,
                    fallback,
                }) => {
                    if values.len() != h || values.iter().any(|v| !v.is_finite()) {
                        log.failures.push(Failure {
                            at: now,
                            stage: "forecast".into(),
                            message: format!("expected {h} finite values, got {}", values.len()),
                        });
                        continue;
                    }
                    let report =
                        ErrorReport::evaluate(now, &values, actual, naive.as_deref(), config.mape_denominator)?;
                    log.reports.push(report);
                    log.issuances.push(Issuance {
                        issued_at: now,
                        fitted_at,
                        fallback,
                    });
                    let keep = match config.keep_forecasts {
                        KeepForecasts::None => false,
                        KeepForecasts::Midnight => now.second_of_day() == 0,
                        KeepForecasts::All => true,
                    };
                    if keep {
                        log.forecasts.push(StoredForecast { issued_at: now, values });
                    }
                }
                Ok(Issue::Abstain(reason)) => log.abstentions.push(Abstention { at: now, reason }),
                Err(e) => log.failures.push(Failure {
                    at: now,
                    stage: "forecast".into(),
                    message: e.to_string(),
                }),
            }
        }
    }
    Ok(SimulationRun {
        config: config.clone(),
        start,
        steps,
        step_seconds: config.step_s,
        forecasters: logs,
    })
}
