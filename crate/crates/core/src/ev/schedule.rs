use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::Timestamp;

/// A vehicle plugged into a station at planning time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Connected {
    pub station: usize,
    pub soc: f64,
    pub battery_kwh: f64,
    /// Power limit from the vehicle and the station.
    pub cap_w: f64,
    pub plugged_at: Timestamp,
    pub departure: Timestamp,
}

impl Connected {
    pub fn need_kwh(&self) -> f64 {
        let need = self.battery_kwh * (1.0 - self.soc);
        // rounding leftovers of a full battery
        if need < 1e-9 {
            0.0
        } else {
            need
        }
    }
}

/// Priority of a vehicle: emptier batteries and longer waits come first.
pub fn priority(soc: f64, hours_connected: f64) -> f64 {
    (1.0 - soc).max(0.0) * (1.0 + hours_connected.max(0.0))
}

/// Splits `budget` in proportion to `weights` without exceeding `caps`;
/// whatever capped recipients cannot take is shared among the rest.
pub fn water_fill(budget: f64, weights: &[f64], caps: &[f64]) -> Vec<f64> {
    let n = weights.len();
    let mut out = vec![0.0; n];
    let mut open: Vec<usize> = (0..n).filter(|&i| caps[i] > 0.0).collect();
    let mut left = budget.max(0.0);
    while !open.is_empty() && left > 0.0 {
        let total: f64 = open.iter().map(|&i| weights[i].max(0.0)).sum();
        let share = |i: usize| {
            if total > 0.0 {
                left * weights[i].max(0.0) / total
            } else {
                left / open.len() as f64
            }
        };
        let capped: Vec<usize> = open.iter().copied().filter(|&i| share(i) >= caps[i]).collect();
        if capped.is_empty() {
            for &i in &open {
                out[i] = share(i);
            }
            break;
        }
        for &i in &capped {
            out[i] = caps[i];
            left -= caps[i];
        }
        open.retain(|i| !capped.contains(i));
    }
    out
}

/// Planned power per vehicle and slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub start: Timestamp,
    pub step_seconds: i64,
    pub stations: Vec<usize>,
    /// `power_w[k][i]`: vehicle `i` in slot `k`.
    pub power_w: Vec<Vec<f64>>,
}

impl Schedule {
    pub fn slot_total(&self, k: usize) -> f64 {
        self.power_w[k].iter().sum()
    }
}

/// Plans charging inside the free capacity `limit − forecast` of every slot
/// of the forecast. Each vehicle is capped by its power limit and by the
/// energy it still needs at that point of the plan, and stops at departure.
pub fn grid_oriented_schedule(
    start: Timestamp,
    step: i64,
    forecast_w: &[f64],
    vehicles: &[Connected],
    limit_w: f64,
) -> Result<Schedule> {
    if forecast_w.is_empty() {
        return Err(Error::EmptyInput("forecast"));
    }
    let hours = step as f64 / 3600.0;
    let mut need: Vec<f64> = vehicles.iter().map(Connected::need_kwh).collect();
    let mut power_w = Vec::with_capacity(forecast_w.len());
    for (k, &f) in forecast_w.iter().enumerate() {
        let at = start.plus(k as i64 * step);
        let free = (limit_w - f).max(0.0);
        let mut weights = Vec::with_capacity(vehicles.len());
        let mut caps = Vec::with_capacity(vehicles.len());
        for (v, &n) in vehicles.iter().zip(&need) {
            let present = at < v.departure;
            let soc = 1.0 - n / v.battery_kwh;
            weights.push(priority(soc, (at.0 - v.plugged_at.0) as f64 / 3600.0));
            caps.push(if present { v.cap_w.min(n * 1000.0 / hours) } else { 0.0 });
        }
        let slot = water_fill(free, &weights, &caps);
        let total: f64 = slot.iter().sum();
        assert!(total <= free + 1e-6 * free.max(1.0), "schedule exceeds free capacity");
        for (n, p) in need.iter_mut().zip(&slot) {
            *n = (*n - p * hours / 1000.0).max(0.0);
        }
        power_w.push(slot);
    }
    Ok(Schedule {
        start,
        step_seconds: step,
        stations: vehicles.iter().map(|v| v.station).collect(),
        power_w,
    })
}
