use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::STATION_MAX_W;
use crate::calendar::HolidaySet;
use crate::error::{Error, Result};
use crate::timeseries::{LoadSeries, Timestamp, SECONDS_PER_DAY};

/// Consumption used to turn driven distance into discharged energy.
pub const KWH_PER_KM: f64 = 0.18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub battery_kwh: f64,
    pub max_power_w: f64,
}

impl Vehicle {
    pub fn random(rng: &mut impl Rng) -> Self {
        Vehicle {
            battery_kwh: rng.random_range(18.7..=100.0),
            max_power_w: if rng.random_bool(0.5) { 11_000.0 } else { STATION_MAX_W },
        }
    }

    /// Highest power this vehicle can draw at a station.
    pub fn power_cap_w(&self) -> f64 {
        self.max_power_w.min(STATION_MAX_W)
    }
}

/// An employee commuting to the building on workdays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverProfile {
    pub vehicle: Vehicle,
    /// One-way distance to work.
    pub commute_km: f64,
    /// Distance driven over the weekend, charged against Monday.
    pub weekend_km: f64,
    /// Arrival after the building's load rise.
    pub arrival_offset_s: i64,
    /// Departure before the building's load fall.
    pub departure_offset_s: i64,
    /// Half-width of the daily uniform offset applied to arrival and departure.
    pub jitter_s: i64,
}

impl DriverProfile {
    pub fn random_set(count: usize, rng: &mut impl Rng) -> Vec<DriverProfile> {
        (0..count)
            .map(|_| DriverProfile {
                vehicle: Vehicle::random(rng),
                commute_km: rng.random_range(5.0..60.0),
                weekend_km: rng.random_range(0.0..150.0),
                arrival_offset_s: rng.random_range(0..=120) * 60,
                departure_offset_s: rng.random_range(0..=120) * 60,
                jitter_s: rng.random_range(5..=30) * 60,
            })
            .collect()
    }
}

/// Times of day at which the building's typical workday load rises and falls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkingHours {
    pub rise_s: i64,
    pub fall_s: i64,
}

impl WorkingHours {
    /// Mean workday profile by time of day; the rise is the first slot above
    /// the midpoint between its minimum and maximum and the fall the last.
    pub fn detect(load: &LoadSeries, holidays: &HolidaySet) -> Result<Self> {
        if SECONDS_PER_DAY % load.step_seconds != 0 {
            return Err(Error::StepRatio {
                from: load.step_seconds,
                to: SECONDS_PER_DAY,
            });
        }
        let per_day = (SECONDS_PER_DAY / load.step_seconds) as usize;
        let mut sum = vec![0.0; per_day];
        let mut count = vec![0usize; per_day];
        for (t, &v) in load.timestamps().zip(&load.values) {
            if t.weekday() <= 5 && !holidays.contains(t.date()) && v.is_finite() {
                let slot = (t.second_of_day() / load.step_seconds) as usize;
                sum[slot] += v;
                count[slot] += 1;
            }
        }
        if count.contains(&0) {
            return Err(Error::EmptyInput("a full workday of load"));
        }
        let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
        let lo = mean.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mid = (lo + hi) / 2.0;
        let rise = mean.iter().position(|&v| v > mid).unwrap_or(0);
        let fall = mean.iter().rposition(|&v| v > mid).map_or(per_day, |i| i + 1);
        Ok(WorkingHours {
            rise_s: rise as i64 * load.step_seconds,
            fall_s: fall as i64 * load.step_seconds,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: usize,
    /// Employee profile, `None` for weekend visitors.
    pub profile: Option<usize>,
    pub vehicle: Vehicle,
    pub arrival: Timestamp,
    pub departure: Timestamp,
    pub soc_in: f64,
}

impl Session {
    pub fn need_kwh(&self) -> f64 {
        self.vehicle.battery_kwh * (1.0 - self.soc_in)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub profiles: usize,
    /// People who may come to charge on weekends and holidays.
    pub visitors: usize,
    /// Chance per visitor and hour between 08:00 and 22:00.
    pub visitor_probability: f64,
    pub visitor_soc: (f64, f64),
    pub visitor_stay_h: (f64, f64),
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            profiles: 10,
            visitors: 10,
            visitor_probability: 0.05,
            visitor_soc: (0.05, 0.20),
            visitor_stay_h: (1.0, 3.0),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        let (s0, s1) = self.visitor_soc;
        let (h0, h1) = self.visitor_stay_h;
        if !(0.0..=1.0).contains(&self.visitor_probability)
            || !(0.0 <= s0 && s0 <= s1 && s1 <= 1.0)
            || !(0.0 < h0 && h0 <= h1)
        {
            return Err(Error::Config(
                "visitor probability and soc must lie in [0, 1] and stays must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Workday sessions for every profile plus random weekend and holiday
/// visitors over `[start, start + days)`, aligned to `step` and sorted by
/// arrival.
pub fn generate_sessions(
    profiles: &[DriverProfile],
    config: &SessionConfig,
    hours: WorkingHours,
    start: Timestamp,
    days: i64,
    step: i64,
    holidays: &HolidaySet,
    seed: u64,
) -> Result<Vec<Session>> {
    config.validate()?;
    if days < 1 || step <= 0 {
        return Err(Error::Config(
            "sessions need at least one day and a positive step".into(),
        ));
    }
    if hours.fall_s <= hours.rise_s {
        return Err(Error::Config("working hours must rise before they fall".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snap = |t: i64| t.div_euclid(step) * step;
    let mut sessions = Vec::new();
    let start = start.midnight();
    for d in 0..days {
        let midnight = start.plus(d * SECONDS_PER_DAY);
        let workday = midnight.weekday() <= 5 && !holidays.contains(midnight.date());
        if workday {
            let mut day: Vec<(usize, i64, i64)> = profiles
                .iter()
                .enumerate()
                .map(|(p, prof)| {
                    let j = prof.jitter_s;
                    let a = hours.rise_s + prof.arrival_offset_s + rng.random_range(-j..=j);
                    let b = hours.fall_s - prof.departure_offset_s + rng.random_range(-j..=j);
                    (p, a, b)
                })
                .collect();
            if day.is_empty() {
                continue;
            }
            // the first arrival meets the load rise and the last departure the fall
            let shift_a = hours.rise_s - day.iter().map(|d| d.1).min().unwrap_or(0);
            let shift_b = hours.fall_s - day.iter().map(|d| d.2).max().unwrap_or(0);
            for entry in &mut day {
                entry.1 += shift_a;
                entry.2 += shift_b;
            }
            let monday = midnight.weekday() == 1;
            for (p, a, b) in day {
                let prof = &profiles[p];
                let (a, b) = (snap(a), snap(b));
                if b <= a {
                    continue;
                }
                let km = 2.0 * prof.commute_km + if monday { prof.weekend_km } else { 0.0 };
                let soc = (1.0 - km * KWH_PER_KM / prof.vehicle.battery_kwh).clamp(0.05, 1.0);
                sessions.push(Session {
                    id: 0,
                    profile: Some(p),
                    vehicle: prof.vehicle,
                    arrival: midnight.plus(a),
                    departure: midnight.plus(b),
                    soc_in: soc,
                });
            }
        } else {
            for hour in 8..22 {
                for _ in 0..config.visitors {
                    if !rng.random_bool(config.visitor_probability) {
                        continue;
                    }
                    let a = snap(hour * 3600 + rng.random_range(0..3600));
                    let stay = rng.random_range(config.visitor_stay_h.0..=config.visitor_stay_h.1) * 3600.0;
                    let b = snap(a + stay.round() as i64).max(a + step);
                    sessions.push(Session {
                        id: 0,
                        profile: None,
                        vehicle: Vehicle::random(&mut rng),
                        arrival: midnight.plus(a),
                        departure: midnight.plus(b),
                        soc_in: rng.random_range(config.visitor_soc.0..=config.visitor_soc.1),
                    });
                }
            }
        }
    }
    sessions.sort_by_key(|s| (s.arrival, s.departure));
    for (i, s) in sessions.iter_mut().enumerate() {
        s.id = i;
    }
    Ok(sessions)
}
