//! Statistical forecasters: fixed standardized load profiles and
//! personalized profiles learned from the building's own measurements.

mod pslp;
mod slp;

pub use pslp::{PslpForecast, PslpState, SLOTS_PER_DAY};
pub use slp::{annual_kwh_from_mean_power, slp_forecast, SlpProfileSet, QUARTER_HOURS, REFERENCE_YEAR};
