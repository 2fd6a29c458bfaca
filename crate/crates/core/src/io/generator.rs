use std::f64::consts::TAU;

use chrono::{Datelike, NaiveDate};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::calendar::HolidaySet;
use crate::error::{Error, Result};
use crate::timeseries::{LoadSeries, Timestamp, SECONDS_PER_DAY};

/// Targets and shape of a synthetic commercial building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticBuildingSpec {
    pub mean_kw: f64,
    pub max_kw: f64,
    /// Night-time consumption.
    pub base_kw: f64,
    pub work_start_h: f64,
    pub work_end_h: f64,
    /// Length of the morning and evening ramps.
    pub ramp_h: f64,
    /// Daytime activity on weekends and holidays relative to workdays.
    pub weekend_level: f64,
    /// Standard deviation of the multiplicative noise.
    pub noise: f64,
    /// Expected short peaks that reach `max_kw` per week.
    pub peaks_per_week: f64,
    pub peak_minutes: i64,
    pub start: NaiveDate,
    pub days: i64,
    pub step_s: i64,
    pub seed: u64,
}

impl Default for SyntheticBuildingSpec {
    /// Statistics of a mid-sized office building.
    fn default() -> Self {
        SyntheticBuildingSpec {
            mean_kw: 19.89,
            max_kw: 84.74,
            base_kw: 3.5,
            work_start_h: 7.0,
            work_end_h: 18.0,
            ramp_h: 1.0,
            weekend_level: 0.1,
            noise: 0.05,
            peaks_per_week: 2.0,
            peak_minutes: 15,
            start: NaiveDate::from_ymd_opt(2019, 1, 7).expect("valid date"),
            days: 91,
            step_s: 300,
            seed: 0,
        }
    }
}

impl SyntheticBuildingSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0 < self.base_kw && self.base_kw < self.mean_kw && self.mean_kw < self.max_kw) {
            return bad(format!(
                "need 0 < base ({}) < mean ({}) < max ({}) kW",
                self.base_kw, self.mean_kw, self.max_kw
            ));
        }
        if !(0.0 <= self.work_start_h
            && self.work_start_h + 2.0 * self.ramp_h < self.work_end_h
            && self.work_end_h <= 24.0
            && self.ramp_h >= 0.0)
        {
            return bad("working hours must fit two ramps inside one day".into());
        }
        if !(0.0..=1.0).contains(&self.weekend_level) || !(0.0..1.0).contains(&self.noise) {
            return bad("weekend level must be in [0, 1] and noise in [0, 1)".into());
        }
        if self.peaks_per_week < 0.0 || self.peak_minutes < 0 {
            return bad("peak settings must be non-negative".into());
        }
        if self.days < 1 || self.step_s <= 0 || SECONDS_PER_DAY % self.step_s != 0 {
            return bad("need at least one day and a step that divides a day".into());
        }
        Ok(())
    }

    /// Activity in `[0, 1]` at a second of the day on a workday.
    fn workday_activity(&self, second: f64) -> f64 {
        let h = second / 3600.0;
        let (s, e, r) = (self.work_start_h, self.work_end_h, self.ramp_h);
        if h < s || h >= e {
            0.0
        } else if r > 0.0 && h < s + r {
            (h - s) / r
        } else if r > 0.0 && h >= e - r {
            (e - h) / r
        } else {
            1.0
        }
    }
}

/// Weekday plateau, night base and quieter weekends with occasional short
/// peaks and multiplicative noise.
///
/// The plateau is solved so that the noise-free series has exactly the
/// target mean; peaks reach the target maximum exactly.
pub fn gen_building_load(spec: &SyntheticBuildingSpec, holidays: &HolidaySet) -> Result<LoadSeries> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let per_day = (SECONDS_PER_DAY / spec.step_s) as usize;
    let n = per_day * spec.days as usize;
    let start = Timestamp::from_date(spec.start);
    let base = spec.base_kw * 1000.0;
    let max = spec.max_kw * 1000.0;

    let mut activity = Vec::with_capacity(n);
    let mut plateau_slots = Vec::new();
    for i in 0..n {
        let t = start.plus(i as i64 * spec.step_s);
        let a = spec.workday_activity(t.second_of_day() as f64);
        let workday = t.weekday() <= 5 && !holidays.contains(t.date());
        if workday && a == 1.0 {
            plateau_slots.push(i);
        }
        activity.push(if workday { a } else { a * spec.weekend_level });
    }

    let peak_len = ((spec.peak_minutes * 60 + spec.step_s - 1) / spec.step_s).max(1) as usize;
    let mut is_peak = vec![false; n];
    let wanted = (spec.peaks_per_week * spec.days as f64 / 7.0).round() as usize;
    let wanted = if spec.peaks_per_week > 0.0 { wanted.max(1) } else { 0 };
    if wanted > 0 && !plateau_slots.is_empty() {
        for k in sample(&mut rng, plateau_slots.len(), wanted.min(plateau_slots.len())) {
            let first = plateau_slots[k];
            for flag in is_peak.iter_mut().skip(first).take(peak_len) {
                *flag = true;
            }
        }
    }

    // mean * n = sum over non-peak (base + (P - base) a) + peaks * max
    let peaks = is_peak.iter().filter(|&&p| p).count() as f64;
    let active: f64 = activity.iter().zip(&is_peak).filter(|(_, &p)| !p).map(|(a, _)| a).sum();
    let rest = (n as f64 - peaks) * base + peaks * max;
    let plateau = base + (spec.mean_kw * 1000.0 * n as f64 - rest) / active;
    if !(plateau > base && plateau <= max) {
        return Err(Error::Config(format!(
            "no plateau between base and max reaches the target mean (needs {:.1} kW)",
            plateau / 1000.0
        )));
    }

    let values = activity
        .iter()
        .zip(&is_peak)
        .map(|(&a, &peak)| {
            if peak {
                return max;
            }
            let clean = base + (plateau - base) * a;
            let z: f64 = StandardNormal.sample(&mut rng);
            (clean * (1.0 + spec.noise * z)).clamp(0.0, max)
        })
        .collect();
    LoadSeries::new(start, spec.step_s, values)
}

/// Mean, maximum and night base (median between 00:00 and 05:00) in kW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadStats {
    pub mean_kw: f64,
    pub max_kw: f64,
    pub base_kw: f64,
    pub annual_mwh: f64,
}

pub fn load_stats(series: &LoadSeries) -> LoadStats {
    let mut night: Vec<f64> = series
        .timestamps()
        .zip(&series.values)
        .filter(|(t, _)| t.second_of_day() < 5 * 3600)
        .map(|(_, &v)| v)
        .collect();
    night.sort_by(f64::total_cmp);
    let base = if night.is_empty() {
        0.0
    } else if night.len() % 2 == 1 {
        night[night.len() / 2]
    } else {
        (night[night.len() / 2 - 1] + night[night.len() / 2]) / 2.0
    };
    let mean = series.mean();
    LoadStats {
        mean_kw: mean / 1000.0,
        max_kw: series.max() / 1000.0,
        base_kw: base / 1000.0,
        annual_mwh: mean * 8760.0 / 1e6,
    }
}

/// Seasonal and daily temperature cycle with autocorrelated noise, in °C.
pub fn gen_temperature(start: NaiveDate, days: i64, step_s: i64, seed: u64) -> Result<LoadSeries> {
    if days < 1 || step_s <= 0 {
        return Err(Error::Config(
            "temperature needs at least one day and a positive step".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7E3D_0C1A);
    let shock = Normal::new(0.0, 0.05).expect("valid normal");
    let t0 = Timestamp::from_date(start);
    let n = (days * SECONDS_PER_DAY / step_s) as usize;
    let mut drift = 0.0f64;
    let values = (0..n)
        .map(|i| {
            let t = t0.plus(i as i64 * step_s);
            let doy = t.date().ordinal0() as f64 + t.second_of_day() as f64 / SECONDS_PER_DAY as f64;
            let seasonal = 9.5 - 9.0 * (TAU * (doy - 15.0) / 365.0).cos();
            let daily = 4.0 * (TAU * (t.second_of_day() as f64 / 3600.0 - 9.0) / 24.0).sin();
            drift = 0.999 * drift + shock.sample(&mut rng);
            seasonal + daily + drift
        })
        .collect();
    LoadSeries::new(t0, step_s, values)
}
