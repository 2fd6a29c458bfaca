//! Rolling short-term load forecasting for commercial buildings and a
//! forecast-driven EV charging simulation built on top of it.
//!
//! The crate is organised bottom-up:
//!
//! * [`timeseries`]: the uniform load series, gap repair, resampling,
//!   min-max scaling, correlation and the ten model input features.
//! * [`calendar`]: seasons, day classes and public holidays.
//! * [`profiles`]: standardized (fixed) and personalized (learned) load
//!   profile forecasters.
//! * [`neural`]: feed-forward and LSTM regressors with hand-written
//!   backpropagation, ADAM and early stopping.
//! * [`metrics`]: MAE, MAPE, RMSE, MASE and boxplot summaries.
//! * [`engine`]: the sliding-window simulation that refits and queries
//!   every forecaster at each 5-minute step.
//! * [`ev`]: driver/session synthesis and uncontrolled vs grid-oriented
//!   charging against a grid connection limit.
//! * [`io`]: CSV ingestion, the synthetic building generator and run export.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::too_many_arguments, clippy::type_complexity)]

pub mod calendar;
pub mod engine;
pub mod error;
pub mod ev;
pub mod io;
pub mod metrics;
pub mod neural;
pub mod profiles;
pub mod sweep;
pub mod timeseries;

pub use error::{Error, Result};
