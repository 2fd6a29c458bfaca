use serde::{Deserialize, Serialize};

use super::{Dataset, EngineConfig, Forecaster, ForecasterSpec, Issue, RefitCadence, RefitRecord, StepContext};
use crate::error::Result;
use crate::neural::{NetworkConfig, NetworkKind, TrainConfig, TrainedModel};
use crate::profiles::{annual_kwh_from_mean_power, slp_forecast, PslpState, SlpProfileSet};
use crate::timeseries::{build_features, Timestamp, N_FEATURES, SECONDS_PER_DAY, SECONDS_PER_WEEK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecasterKind {
    Slp,
    Pslp,
    Neural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readiness {
    Ready,
    NotReady { first_feasible: Timestamp },
}

/// Minimum history before a forecaster kind may issue: seven days for the
/// networks (lag features), one day for the personalized profile, none for
/// the standardized profile.
pub fn cold_start_policy(kind: ForecasterKind, history_start: Timestamp, now: Timestamp) -> Readiness {
    let needed = match kind {
        ForecasterKind::Slp => return Readiness::Ready,
        ForecasterKind::Pslp => SECONDS_PER_DAY,
        ForecasterKind::Neural => SECONDS_PER_WEEK,
    };
    let first_feasible = history_start.plus(needed);
    if now >= first_feasible {
        Readiness::Ready
    } else {
        Readiness::NotReady { first_feasible }
    }
}

pub fn build_forecaster(spec: ForecasterSpec, dataset: &Dataset, config: &EngineConfig) -> Result<Box<dyn Forecaster>> {
    Ok(match spec {
        ForecasterSpec::Slp => {
            let annual = config
                .slp_annual_kwh
                .unwrap_or_else(|| annual_kwh_from_mean_power(dataset.load.mean()));
            Box::new(SlpForecaster::new(SlpProfileSet::g1_like(), annual))
        }
        ForecasterSpec::Pslp => Box::new(PslpForecaster::new(config.pslp_refit)),
        ForecasterSpec::Neural(net) => Box::new(NeuralForecaster::new(
            net,
            TrainConfig {
                seed: config.seed,
                ..config.train.clone()
            },
            config.nn_refit,
            config.min_training_rows,
        )?),
        ForecasterSpec::LastValue => Box::new(LastValueForecaster),
    })
}

/// Fixed profile scaled to a constant annual consumption.
pub struct SlpForecaster {
    profiles: SlpProfileSet,
    annual_kwh: f64,
}

impl SlpForecaster {
    pub fn new(profiles: SlpProfileSet, annual_kwh: f64) -> Self {
        SlpForecaster { profiles, annual_kwh }
    }
}

impl Forecaster for SlpForecaster {
    fn name(&self) -> String {
        "slp".into()
    }

    fn refit(&mut self, _: &StepContext<'_>) -> Result<Option<RefitRecord>> {
        Ok(None)
    }

    fn forecast(&self, ctx: &StepContext<'_>) -> Result<Issue> {
        let series = slp_forecast(
            &self.profiles,
            self.annual_kwh,
            ctx.now,
            ctx.config.horizon_steps,
            ctx.config.step_s,
            ctx.holidays,
        )?;
        Ok(Issue::Forecast {
            values: series.values,
            fitted_at: None,
            fallback: false,
        })
    }
}

pub struct PslpForecaster {
    state: PslpState,
    cadence: RefitCadence,
}

impl PslpForecaster {
    pub fn new(cadence: RefitCadence) -> Self {
        PslpForecaster {
            state: PslpState::new(),
            cadence,
        }
    }

    pub fn state(&self) -> &PslpState {
        &self.state
    }
}

impl Forecaster for PslpForecaster {
    fn name(&self) -> String {
        "pslp".into()
    }

    fn refit(&mut self, ctx: &StepContext<'_>) -> Result<Option<RefitRecord>> {
        if !self.cadence.due(self.state.last_refit(), ctx.now, ctx.config.step_s) {
            return Ok(None);
        }
        let from = self.state.absorbed_until().unwrap_or(ctx.data_start);
        let new = ctx.history(from);
        let rows = self.state.refit_series(&new, ctx.holidays, ctx.now);
        Ok(Some(RefitRecord {
            at: ctx.now,
            rows,
            first_row: (rows > 0).then_some(new.start),
            last_row: (rows > 0).then(|| new.timestamp_at(new.len() - 1)),
            scaler_fitted_at: None,
            epochs: None,
            best_loss: None,
        }))
    }

    fn forecast(&self, ctx: &StepContext<'_>) -> Result<Issue> {
        if let Readiness::NotReady { first_feasible } = cold_start_policy(ForecasterKind::Pslp, ctx.data_start, ctx.now)
        {
            return Ok(Issue::Abstain(format!(
                "less than one day of history until {first_feasible}"
            )));
        }
        if self.state.is_empty() {
            return Ok(Issue::Abstain("no observations absorbed yet".into()));
        }
        let f = self
            .state
            .forecast(ctx.now, ctx.config.horizon_steps, ctx.config.step_s, ctx.holidays)?;
        Ok(Issue::Forecast {
            fallback: f.any_fallback(),
            values: f.series.values,
            fitted_at: self.state.last_refit(),
        })
    }
}

/// FFNN or LSTM mapping the feature row(s) of each horizon timestamp to
/// its load. The network is compiled once and warm-started at each refit
/// on the rows of the trailing window.
pub struct NeuralForecaster {
    model: TrainedModel,
    cadence: RefitCadence,
    min_training_rows: usize,
    last_refit: Option<Timestamp>,
}

impl NeuralForecaster {
    pub fn new(
        config: NetworkConfig,
        train: TrainConfig,
        cadence: RefitCadence,
        min_training_rows: usize,
    ) -> Result<Self> {
        Ok(NeuralForecaster {
            model: TrainedModel::compile(config, train, N_FEATURES)?,
            cadence,
            min_training_rows: min_training_rows.max(1),
            last_refit: None,
        })
    }

    pub fn model(&self) -> &TrainedModel {
        &self.model
    }

    /// First training row at `now`: the later of the window start and the
    /// first timestamp with a week of lag history.
    fn training_start(&self, ctx: &StepContext<'_>) -> Timestamp {
        let window_start = ctx.now.plus(-ctx.config.window_seconds());
        window_start.max(ctx.data_start.plus(SECONDS_PER_WEEK))
    }
}

impl Forecaster for NeuralForecaster {
    fn name(&self) -> String {
        self.model.config.to_string()
    }

    fn refit(&mut self, ctx: &StepContext<'_>) -> Result<Option<RefitRecord>> {
        let fitted = self.model.input_scaler.is_some();
        if fitted && !self.cadence.due(self.last_refit, ctx.now, ctx.config.step_s) {
            return Ok(None);
        }
        let from = self.training_start(ctx);
        let rows = ((ctx.now.0 - from.0) / ctx.config.step_s).max(0) as usize;
        if rows < self.min_training_rows.max(self.model.context_rows() + 1) {
            return Ok(None);
        }
        let history = ctx.history(from.plus(-SECONDS_PER_WEEK));
        let features = build_features(&history, ctx.temperature, ctx.holidays, from, rows)?;
        let targets = features.targets()?;
        let context = self.model.context_rows();
        let history = self.model.fit(&features.inputs(), &targets)?;
        let record = RefitRecord {
            at: ctx.now,
            rows: rows - context,
            first_row: features.timestamps.first().copied(),
            last_row: features.timestamps.last().copied(),
            scaler_fitted_at: Some(ctx.now),
            epochs: Some(history.losses.len()),
            best_loss: Some(history.best_loss),
        };
        self.last_refit = Some(ctx.now);
        Ok(Some(record))
    }

    fn forecast(&self, ctx: &StepContext<'_>) -> Result<Issue> {
        if let Readiness::NotReady { first_feasible } =
            cold_start_policy(ForecasterKind::Neural, ctx.data_start, ctx.now)
        {
            return Ok(Issue::Abstain(format!(
                "lag features unavailable until {first_feasible}"
            )));
        }
        let Some(fitted_at) = self.last_refit else {
            return Ok(Issue::Abstain(format!(
                "waiting for {} training rows",
                self.min_training_rows
            )));
        };
        let context = self.model.context_rows();
        let first = ctx.now.plus(-(context as i64) * ctx.config.step_s);
        if first < ctx.data_start.plus(SECONDS_PER_WEEK) {
            return Ok(Issue::Abstain("not enough rows for the lookback".into()));
        }
        let history = ctx.history(first.plus(-SECONDS_PER_WEEK));
        let features = build_features(
            &history,
            ctx.temperature,
            ctx.holidays,
            first,
            context + ctx.config.horizon_steps,
        )?;
        let values = self.model.predict(&features.inputs())?;
        Ok(Issue::Forecast {
            values,
            fitted_at: Some(fitted_at),
            fallback: false,
        })
    }
}

impl NeuralForecaster {
    pub fn kind(&self) -> NetworkKind {
        self.model.config.kind
    }
}

/// Repeats the last reading before the issuance time.
pub struct LastValueForecaster;

impl Forecaster for LastValueForecaster {
    fn name(&self) -> String {
        "last".into()
    }

    fn refit(&mut self, _: &StepContext<'_>) -> Result<Option<RefitRecord>> {
        Ok(None)
    }

    fn forecast(&self, ctx: &StepContext<'_>) -> Result<Issue> {
        Ok(match ctx.last_value() {
            Some(v) => Issue::Forecast {
                values: vec![v; ctx.config.horizon_steps],
                fitted_at: None,
                fallback: false,
            },
            None => Issue::Abstain("no reading yet".into()),
        })
    }
}
