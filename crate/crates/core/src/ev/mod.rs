//! Charging stations added to the building: synthetic sessions, charging
//! strategies and overload accounting against the grid connection limit.
//!
//! Each scenario walks the building's actual load one step at a time.
//! Stations serve one vehicle at a time and arriving vehicles queue in
//! arrival order. Uncontrolled charging draws full power; grid-oriented
//! charging shares the forecast free capacity of the current slot, planned
//! anew at every step.

mod drivers;
mod schedule;

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use drivers::{generate_sessions, DriverProfile, Session, SessionConfig, Vehicle, WorkingHours, KWH_PER_KM};
pub use schedule::{grid_oriented_schedule, priority, water_fill, Connected, Schedule};

use crate::calendar::HolidaySet;
use crate::engine::ForecasterLog;
use crate::error::{Error, Result};
use crate::timeseries::{LoadSeries, Timestamp, SECONDS_PER_DAY};

pub const STATION_MAX_W: f64 = 22_000.0;

/// Tolerance below which a total above the limit is not an overload.
const OVERLOAD_EPS_W: f64 = 1e-6;

/// Connection limit at which the measured peak is 80 %, rounded up to 10 kW.
pub fn derive_grid_limit(load: &LoadSeries) -> Result<f64> {
    let peak = load
        .values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::EmptyInput("building load"));
    }
    // peak / 0.8 written as an exact product
    Ok(((peak * 1.25) / 10_000.0).ceil().max(1.0) * 10_000.0)
}

/// Forecast of the building load for the slot starting at the issuance time.
pub trait ForecastSource: Sync {
    fn first_slot(&self, at: Timestamp) -> Option<f64>;
}

/// The actual load.
pub struct PerfectForecast<'a>(pub &'a LoadSeries);

impl ForecastSource for PerfectForecast<'_> {
    fn first_slot(&self, at: Timestamp) -> Option<f64> {
        self.0.value_at(at)
    }
}

/// The reading one week earlier.
pub struct WeeklyPersistence<'a>(pub &'a LoadSeries);

impl ForecastSource for WeeklyPersistence<'_> {
    fn first_slot(&self, at: Timestamp) -> Option<f64> {
        self.0.value_at(at.plus(-7 * SECONDS_PER_DAY))
    }
}

/// First values of forecasts kept by a simulation run.
pub struct StoredForecasts(HashMap<Timestamp, f64>);

impl StoredForecasts {
    pub fn from_log(log: &ForecasterLog) -> Self {
        StoredForecasts(
            log.forecasts
                .iter()
                .filter_map(|f| f.values.first().map(|&v| (f.issued_at, v)))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl ForecastSource for StoredForecasts {
    fn first_slot(&self, at: Timestamp) -> Option<f64> {
        self.0.get(&at).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Controlled,
    Uncontrolled,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Controlled => "controlled",
            Strategy::Uncontrolled => "uncontrolled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub id: usize,
    pub station: Option<usize>,
    pub plugged_at: Option<Timestamp>,
    pub delivered_kwh: f64,
    /// Time with positive charging power.
    pub charging_s: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OverloadStats {
    /// Steps whose actual total exceeds the limit.
    pub registered_overloads: usize,
    pub max_overload_w: f64,
    /// Mean excess over the overloaded steps.
    pub mean_overload_w: f64,
    /// Sessions that got a station.
    pub sessions: usize,
    /// Sessions that left before a station became free.
    pub unserved: usize,
    pub mean_energy_kwh: f64,
    pub mean_charging_duration_s: f64,
    pub total_energy_kwh: f64,
    pub peak_total_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub stats: OverloadStats,
    pub sessions: Vec<SessionOutcome>,
}

/// Runs one scenario over every step of `load`. `forecast` is only used by
/// the controlled strategy; where it has no value, the last measured load
/// is held.
pub fn simulate(
    sessions: &[Session],
    stations: usize,
    strategy: Strategy,
    limit_w: f64,
    load: &LoadSeries,
    forecast: &dyn ForecastSource,
) -> Result<ScenarioOutcome> {
    if stations == 0 {
        return Err(Error::Config("a scenario needs at least one station".into()));
    }
    if !(limit_w > 0.0) {
        return Err(Error::Config(format!("grid limit must be positive, got {limit_w}")));
    }
    if load.is_empty() {
        return Err(Error::EmptyInput("building load"));
    }
    let step = load.step_seconds;
    let hours = step as f64 / 3600.0;
    let mut order: Vec<usize> = (0..sessions.len()).collect();
    order.sort_by_key(|&i| (sessions[i].arrival, sessions[i].id));
    let mut out: Vec<SessionOutcome> = sessions
        .iter()
        .map(|s| SessionOutcome {
            id: s.id,
            station: None,
            plugged_at: None,
            delivered_kwh: 0.0,
            charging_s: 0,
        })
        .collect();
    let mut occupant: Vec<Option<usize>> = vec![None; stations];
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    let mut overloads = Vec::new();
    let mut peak_total = f64::NEG_INFINITY;

    for (k, &building) in load.values.iter().enumerate() {
        let t = load.timestamp_at(k);
        for slot in occupant.iter_mut() {
            if slot.is_some_and(|i| sessions[i].departure <= t) {
                *slot = None;
            }
        }
        while next < order.len() && sessions[order[next]].arrival <= t {
            queue.push_back(order[next]);
            next += 1;
        }
        queue.retain(|&i| sessions[i].departure > t);
        for (s, slot) in occupant.iter_mut().enumerate() {
            if slot.is_none() {
                if let Some(i) = queue.pop_front() {
                    *slot = Some(i);
                    out[i].station = Some(s);
                    out[i].plugged_at = Some(t);
                }
            }
        }

        let connected: Vec<Connected> = occupant
            .iter()
            .enumerate()
            .filter_map(|(s, slot)| slot.map(|i| (s, i)))
            .map(|(s, i)| {
                let session = &sessions[i];
                let soc = session.soc_in + out[i].delivered_kwh / session.vehicle.battery_kwh;
                Connected {
                    station: s,
                    soc: soc.min(1.0),
                    battery_kwh: session.vehicle.battery_kwh,
                    cap_w: session.vehicle.power_cap_w(),
                    plugged_at: out[i].plugged_at.unwrap_or(t),
                    departure: session.departure,
                }
            })
            .collect();
        let power: Vec<f64> = match strategy {
            Strategy::Uncontrolled => connected
                .iter()
                .map(|v| v.cap_w.min(v.need_kwh() * 1000.0 / hours))
                .collect(),
            Strategy::Controlled => {
                let expected = forecast
                    .first_slot(t)
                    .filter(|v| v.is_finite())
                    .or_else(|| k.checked_sub(1).map(|p| load.values[p]))
                    .unwrap_or(limit_w);
                let plan = grid_oriented_schedule(t, step, &[expected], &connected, limit_w)?;
                plan.power_w.into_iter().next().unwrap_or_default()
            }
        };
        for (v, &p) in connected.iter().zip(&power) {
            let i = occupant[v.station].expect("connected vehicle has a station");
            if p > 0.0 {
                out[i].delivered_kwh += p * hours / 1000.0;
                out[i].charging_s += step;
            }
        }
        let total = building + power.iter().sum::<f64>();
        peak_total = peak_total.max(total);
        if total > limit_w + OVERLOAD_EPS_W {
            overloads.push(total - limit_w);
        }
    }

    let served: Vec<&SessionOutcome> = out.iter().filter(|o| o.station.is_some()).collect();
    // sessions arriving within the span that never reached a station
    let end = load.end();
    let unserved = sessions
        .iter()
        .zip(&out)
        .filter(|(s, o)| o.station.is_none() && s.arrival < end && s.departure > load.start)
        .count();
    let n = served.len().max(1) as f64;
    let total_energy: f64 = served.iter().map(|o| o.delivered_kwh).sum();
    let stats = OverloadStats {
        registered_overloads: overloads.len(),
        max_overload_w: overloads.iter().copied().fold(0.0, f64::max),
        mean_overload_w: if overloads.is_empty() {
            0.0
        } else {
            overloads.iter().sum::<f64>() / overloads.len() as f64
        },
        sessions: served.len(),
        unserved,
        mean_energy_kwh: total_energy / n,
        mean_charging_duration_s: served.iter().map(|o| o.charging_s as f64).sum::<f64>() / n,
        total_energy_kwh: total_energy,
        peak_total_w: peak_total,
    };
    Ok(ScenarioOutcome { stats, sessions: out })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvStudyConfig {
    pub stations: Vec<usize>,
    /// Seeded scenarios per station count.
    pub scenarios: usize,
    pub seed: u64,
    /// Derived from the building peak when absent.
    pub limit_w: Option<f64>,
    pub sessions: SessionConfig,
}

impl Default for EvStudyConfig {
    fn default() -> Self {
        EvStudyConfig {
            stations: vec![2, 5, 10],
            scenarios: 20,
            seed: 0,
            limit_w: None,
            sessions: SessionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub stations: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub stats: OverloadStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvStudy {
    pub limit_w: f64,
    pub hours: WorkingHours,
    pub results: Vec<ScenarioResult>,
    /// Sessions and outcomes of the first seed, keyed like `results`.
    pub first_sessions: Vec<Session>,
    pub first_outcomes: Vec<(usize, Strategy, Vec<SessionOutcome>)>,
}

/// Every station count with both strategies over `scenarios` session
/// draws. The sessions of a seed are shared by all of its scenarios.
pub fn ev_study(
    load: &LoadSeries,
    holidays: &HolidaySet,
    forecast: &dyn ForecastSource,
    config: &EvStudyConfig,
) -> Result<EvStudy> {
    if config.stations.is_empty() || config.stations.contains(&0) || config.scenarios == 0 {
        return Err(Error::Config(
            "need at least one scenario and positive station counts".into(),
        ));
    }
    let limit_w = match config.limit_w {
        Some(l) if l > 0.0 => l,
        Some(l) => return Err(Error::Config(format!("grid limit must be positive, got {l}"))),
        None => derive_grid_limit(load)?,
    };
    let hours = WorkingHours::detect(load, holidays)?;
    let days = (load.end().0 - load.start.midnight().0 + SECONDS_PER_DAY - 1) / SECONDS_PER_DAY;
    let mut draws: Vec<(u64, Vec<Session>)> = (0..config.scenarios as u64)
        .map(|k| {
            let seed = config.seed.wrapping_add(k);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let profiles = DriverProfile::random_set(config.sessions.profiles, &mut rng);
            let sessions = generate_sessions(
                &profiles,
                &config.sessions,
                hours,
                load.start,
                days,
                load.step_seconds,
                holidays,
                seed.wrapping_add(0x5E55),
            )?;
            Ok((seed, sessions))
        })
        .collect::<Result<_>>()?;
    let mut cells = Vec::new();
    for (d, _) in draws.iter().enumerate() {
        for &stations in &config.stations {
            for strategy in [Strategy::Controlled, Strategy::Uncontrolled] {
                cells.push((d, stations, strategy));
            }
        }
    }
    let outcomes: Vec<ScenarioOutcome> = cells
        .par_iter()
        .map(|&(d, stations, strategy)| simulate(&draws[d].1, stations, strategy, limit_w, load, forecast))
        .collect::<Result<_>>()?;
    let mut results = Vec::with_capacity(cells.len());
    let mut first_outcomes = Vec::new();
    for (&(d, stations, strategy), outcome) in cells.iter().zip(outcomes) {
        results.push(ScenarioResult {
            stations,
            strategy,
            seed: draws[d].0,
            stats: outcome.stats,
        });
        if d == 0 {
            first_outcomes.push((stations, strategy, outcome.sessions));
        }
    }
    Ok(EvStudy {
        limit_w,
        hours,
        results,
        first_sessions: draws.swap_remove(0).1,
        first_outcomes,
    })
}

/// `HH:MM:SS`.
pub fn format_duration(seconds: f64) -> String {
    let s = seconds.round().max(0.0) as i64;
    format!("{:02}:{:02}:{:02}", s / 3600, s / 60 % 60, s % 60)
}

impl EvStudy {
    /// Per-scenario statistics, one row per station count, strategy and seed.
    pub fn scenarios_csv(&self) -> String {
        let mut out = String::from(
            "stations,strategy,seed,sessions,unserved,mean_energy_kwh,mean_charging_duration_s,\
             registered_overloads,max_overload_kw,mean_overload_kw,peak_total_kw\n",
        );
        for r in &self.results {
            let s = &r.stats;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.stations,
                r.strategy.as_str(),
                r.seed,
                s.sessions,
                s.unserved,
                s.mean_energy_kwh,
                s.mean_charging_duration_s,
                s.registered_overloads,
                s.max_overload_w / 1000.0,
                s.mean_overload_w / 1000.0,
                s.peak_total_w / 1000.0
            );
        }
        out
    }

    /// Means over seeds for every station count and strategy.
    pub fn table(&self) -> Vec<(usize, Strategy, OverloadStats)> {
        let mut groups: Vec<(usize, Strategy, Vec<&OverloadStats>)> = Vec::new();
        for r in &self.results {
            match groups.iter_mut().find(|g| g.0 == r.stations && g.1 == r.strategy) {
                Some(g) => g.2.push(&r.stats),
                None => groups.push((r.stations, r.strategy, vec![&r.stats])),
            }
        }
        groups
            .into_iter()
            .map(|(stations, strategy, all)| {
                let n = all.len() as f64;
                let mean = |f: fn(&OverloadStats) -> f64| all.iter().map(|s| f(s)).sum::<f64>() / n;
                let stats = OverloadStats {
                    registered_overloads: (mean(|s| s.registered_overloads as f64)).round() as usize,
                    max_overload_w: mean(|s| s.max_overload_w),
                    mean_overload_w: mean(|s| s.mean_overload_w),
                    sessions: (mean(|s| s.sessions as f64)).round() as usize,
                    unserved: (mean(|s| s.unserved as f64)).round() as usize,
                    mean_energy_kwh: mean(|s| s.mean_energy_kwh),
                    mean_charging_duration_s: mean(|s| s.mean_charging_duration_s),
                    total_energy_kwh: mean(|s| s.total_energy_kwh),
                    peak_total_w: mean(|s| s.peak_total_w),
                };
                (stations, strategy, stats)
            })
            .collect()
    }

    pub fn table_csv(&self) -> String {
        let mut out = String::from(
            "stations,strategy,mean_energy_kwh,mean_charging_duration,registered_overloads,max_overload_kw,mean_overload_kw\n",
        );
        for (stations, strategy, s) in self.table() {
            let _ = writeln!(
                out,
                "{},{},{:.2},{},{},{:.2},{:.2}",
                stations,
                strategy.as_str(),
                s.mean_energy_kwh,
                format_duration(s.mean_charging_duration_s),
                s.registered_overloads,
                s.max_overload_w / 1000.0,
                s.mean_overload_w / 1000.0
            );
        }
        out
    }

    /// Human-readable table with one column per scenario.
    pub fn table_text(&self) -> String {
        let table = self.table();
        let mut out = format!(
            "Grid limit {:.0} kW, workday load {} to {}, {} seeded scenario(s) per column\n",
            self.limit_w / 1000.0,
            format_duration(self.hours.rise_s as f64),
            format_duration(self.hours.fall_s as f64),
            self.results.len() / table.len().max(1)
        );
        let width = 14;
        let _ = write!(out, "{:<32}", "Stations");
        for (stations, _, _) in &table {
            let _ = write!(out, "{stations:>width$}");
        }
        let _ = write!(out, "\n{:<32}", "Strategy");
        for (_, strategy, _) in &table {
            let _ = write!(out, "{:>width$}", strategy.as_str());
        }
        out.push('\n');
        let rows: [(&str, fn(&OverloadStats) -> String); 5] = [
            ("Average energy charged [kWh]", |s| format!("{:.2}", s.mean_energy_kwh)),
            ("Average charging duration", |s| {
                format_duration(s.mean_charging_duration_s)
            }),
            ("Registered overloads", |s| s.registered_overloads.to_string()),
            ("Maximum overload [kW]", |s| format!("{:.2}", s.max_overload_w / 1000.0)),
            ("Mean overload [kW]", |s| format!("{:.2}", s.mean_overload_w / 1000.0)),
        ];
        for (label, cell) in rows {
            let _ = write!(out, "{label:<32}");
            for (_, _, s) in &table {
                let _ = write!(out, "{:>width$}", cell(s));
            }
            out.push('\n');
        }
        out.push_str("Overloads count 5-minute steps above the limit.\n");
        out
    }

    pub fn sessions_csv(&self) -> String {
        let mut out = String::from("id,profile,arrival,departure,soc_in,battery_kwh,max_power_kw\n");
        for s in &self.first_sessions {
            let profile = s.profile.map(|p| p.to_string()).unwrap_or_else(|| "visitor".into());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.id,
                profile,
                s.arrival,
                s.departure,
                s.soc_in,
                s.vehicle.battery_kwh,
                s.vehicle.max_power_w / 1000.0
            );
        }
        out
    }

    pub fn outcomes_csv(&self) -> String {
        let mut out = String::from("stations,strategy,id,station,plugged_at,delivered_kwh,charging_s\n");
        for (stations, strategy, outcomes) in &self.first_outcomes {
            for o in outcomes {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    stations,
                    strategy.as_str(),
                    o.id,
                    o.station.map(|s| s.to_string()).unwrap_or_default(),
                    o.plugged_at.map(|t| t.to_string()).unwrap_or_default(),
                    o.delivered_kwh,
                    o.charging_s
                );
            }
        }
        out
    }
}
