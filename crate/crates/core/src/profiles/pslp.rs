use serde::{Deserialize, Serialize};

use crate::calendar::{classify_day, DayClass, HolidaySet, Season};
use crate::error::{Error, Result};
use crate::timeseries::{LoadSeries, Timestamp, SECONDS_PER_DAY};

pub const SLOTS_PER_DAY: usize = 288;
const SLOT_SECONDS: i64 = 300;
const REFIT_SECOND_OF_DAY: i64 = 12 * 3600;

/// Learned per (season, day class) profiles kept as running sums and
/// counts per 5-minute slot of the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PslpState {
    sums: Vec<f64>,
    counts: Vec<u64>,
    last_refit: Option<Timestamp>,
    /// Measurements before this instant have been absorbed.
    absorbed_until: Option<Timestamp>,
}

impl Default for PslpState {
    fn default() -> Self {
        PslpState {
            sums: vec![0.0; 9 * SLOTS_PER_DAY],
            counts: vec![0; 9 * SLOTS_PER_DAY],
            last_refit: None,
            absorbed_until: None,
        }
    }
}

/// Forecast plus, per step, whether a substitute profile had to be used.
#[derive(Debug, Clone, PartialEq)]
pub struct PslpForecast {
    pub series: LoadSeries,
    pub fallback: Vec<bool>,
}

impl PslpForecast {
    pub fn any_fallback(&self) -> bool {
        self.fallback.iter().any(|&f| f)
    }
}

fn bucket(season: Season, class: DayClass) -> usize {
    season.index() * 3 + class.index()
}

fn slot_of(ts: Timestamp) -> usize {
    (ts.second_of_day() / SLOT_SECONDS) as usize
}

impl PslpState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn last_refit(&self) -> Option<Timestamp> {
        self.last_refit
    }

    pub fn absorbed_until(&self) -> Option<Timestamp> {
        self.absorbed_until
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    pub fn count(&self, season: Season, class: DayClass, slot: usize) -> u64 {
        self.counts[bucket(season, class) * SLOTS_PER_DAY + slot]
    }

    /// Mean of every measurement absorbed into this slot, if any.
    pub fn slot_mean(&self, season: Season, class: DayClass, slot: usize) -> Option<f64> {
        let i = bucket(season, class) * SLOTS_PER_DAY + slot;
        (self.counts[i] > 0).then(|| self.sums[i] / self.counts[i] as f64)
    }

    /// Whether any slot of the bucket has been observed.
    pub fn has_bucket(&self, season: Season, class: DayClass) -> bool {
        let b = bucket(season, class) * SLOTS_PER_DAY;
        self.counts[b..b + SLOTS_PER_DAY].iter().any(|&c| c > 0)
    }

    /// A refit is due at the first 12:00 after the previous refit; the very
    /// first refit is due immediately.
    pub fn refit_due(&self, now: Timestamp) -> bool {
        match self.last_refit {
            None => true,
            Some(last) => next_noon_after(last) <= now,
        }
    }

    /// Absorbs every measurement with `absorbed_until <= ts < clock` and
    /// marks `clock` as the refit time. Returns the number absorbed.
    pub fn refit(
        &mut self,
        measurements: impl IntoIterator<Item = (Timestamp, f64)>,
        holidays: &HolidaySet,
        clock: Timestamp,
    ) -> usize {
        let from = self.absorbed_until;
        let mut absorbed = 0;
        for (ts, value) in measurements {
            if ts >= clock || from.is_some_and(|f| ts < f) || !value.is_finite() {
                continue;
            }
            let (season, class) = classify_day(ts.date(), holidays);
            let i = bucket(season, class) * SLOTS_PER_DAY + slot_of(ts);
            self.sums[i] += value;
            self.counts[i] += 1;
            absorbed += 1;
        }
        self.last_refit = Some(clock);
        self.absorbed_until = Some(clock);
        absorbed
    }

    /// Convenience wrapper feeding a regularized series.
    pub fn refit_series(&mut self, series: &LoadSeries, holidays: &HolidaySet, clock: Timestamp) -> usize {
        let from = self.absorbed_until.unwrap_or(series.start);
        let window = series.window(from, clock);
        let pairs: Vec<_> = window.timestamps().zip(window.values.iter().copied()).collect();
        self.refit(pairs, holidays, clock)
    }

    /// Profile value for one timestamp, walking the fallback chain: the
    /// requested class through the seasons from most recent backwards, then
    /// the other classes in weekday/saturday/sunday order, then the mean of
    /// everything absorbed.
    fn value_for(&self, ts: Timestamp, holidays: &HolidaySet) -> Result<(f64, bool)> {
        let date = ts.date();
        let (season, class) = classify_day(date, holidays);
        let slot = slot_of(ts);
        let seasons = Season::backward_chain(date);
        let classes = std::iter::once(class).chain(DayClass::ALL.into_iter().filter(|&c| c != class));
        for c in classes {
            for &s in &seasons {
                if let Some(v) = self.slot_mean(s, c, slot) {
                    return Ok((v, (s, c) != (season, class)));
                }
            }
        }
        // the chain covers every bucket, so this slot has never been observed
        let sum: f64 = self.sums.iter().sum();
        let count: u64 = self.counts.iter().sum();
        if count == 0 {
            return Err(Error::NotFitted("personalized profile has no observations"));
        }
        Ok((sum / count as f64, true))
    }

    pub fn forecast(
        &self,
        start: Timestamp,
        steps: usize,
        step_seconds: i64,
        holidays: &HolidaySet,
    ) -> Result<PslpForecast> {
        if self.is_empty() {
            return Err(Error::NotFitted("personalized profile has no observations"));
        }
        let mut values = Vec::with_capacity(steps);
        let mut fallback = Vec::with_capacity(steps);
        for k in 0..steps {
            let (v, fb) = self.value_for(start.plus(k as i64 * step_seconds), holidays)?;
            values.push(v);
            fallback.push(fb);
        }
        Ok(PslpForecast {
            series: LoadSeries::new(start, step_seconds, values)?,
            fallback,
        })
    }
}

fn next_noon_after(ts: Timestamp) -> Timestamp {
    let noon = ts.midnight().plus(REFIT_SECOND_OF_DAY);
    if noon > ts {
        noon
    } else {
        noon.plus(SECONDS_PER_DAY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(d: u32, h: u32, m: u32) -> Timestamp {
        Timestamp::from_ymd_hms(2019, 3, d, h, m, 0).unwrap()
    }

    fn day_series(day: u32, f: impl Fn(usize) -> f64) -> LoadSeries {
        LoadSeries::new(ts(day, 0, 0), 300, (0..SLOTS_PER_DAY).map(f).collect()).unwrap()
    }

    #[test]
    fn one_tuesday_reproduces_that_day() {
        // 2019-03-05 is a Tuesday
        let day = day_series(5, |i| (i * 7 % 13) as f64 + 1.0);
        let mut st = PslpState::new();
        st.refit_series(&day, &HolidaySet::default(), ts(6, 0, 0));
        let f = st
            .forecast(ts(6, 0, 0), SLOTS_PER_DAY, 300, &HolidaySet::default())
            .unwrap();
        assert_eq!(f.series.values, day.values);
        assert!(!f.any_fallback());
    }

    #[test]
    fn two_weekdays_average() {
        let mut st = PslpState::new();
        let h = HolidaySet::default();
        st.refit_series(&day_series(5, |_| 10.0), &h, ts(6, 0, 0));
        st.refit_series(&day_series(6, |_| 30.0), &h, ts(7, 0, 0));
        assert_eq!(st.slot_mean(Season::Winter, DayClass::Weekday, 100), Some(20.0));
        assert_eq!(st.count(Season::Winter, DayClass::Weekday, 100), 2);
    }

    #[test]
    fn refit_clock_boundary() {
        let h = HolidaySet::default();
        let mut st = PslpState::new();
        let n = st.refit([(ts(5, 11, 59), 4.0), (ts(5, 12, 1), 9.0)], &h, ts(5, 12, 0));
        assert_eq!(n, 1);
        assert_eq!(st.slot_mean(Season::Winter, DayClass::Weekday, 143), Some(4.0));
        assert_eq!(st.slot_mean(Season::Winter, DayClass::Weekday, 144), None);
        // the later reading is picked up by the next refit
        let n = st.refit([(ts(5, 11, 59), 4.0), (ts(5, 12, 1), 9.0)], &h, ts(6, 12, 0));
        assert_eq!(n, 1);
        assert_eq!(st.slot_mean(Season::Winter, DayClass::Weekday, 144), Some(9.0));
        assert_eq!(st.slot_mean(Season::Winter, DayClass::Weekday, 143), Some(4.0));
    }

    #[test]
    fn refit_schedule_is_daily_at_noon() {
        let mut st = PslpState::new();
        assert!(st.refit_due(ts(5, 3, 0)));
        st.refit(std::iter::empty(), &HolidaySet::default(), ts(5, 3, 0));
        assert!(!st.refit_due(ts(5, 11, 55)));
        assert!(st.refit_due(ts(5, 12, 0)));
        st.refit(std::iter::empty(), &HolidaySet::default(), ts(5, 12, 0));
        assert!(!st.refit_due(ts(6, 11, 55)));
        assert!(st.refit_due(ts(6, 12, 0)));
    }

    #[test]
    fn prior_season_and_class_fallback() {
        let h = HolidaySet::default();
        let mut st = PslpState::new();
        // Saturday 2019-03-16 (winter)
        st.refit_series(&day_series(16, |_| 5.0), &h, ts(17, 0, 0));
        // Saturday 2019-03-23 is in the transition season
        let f = st.forecast(ts(23, 0, 0), 12, 300, &h).unwrap();
        assert!(f.series.values.iter().all(|&v| v == 5.0));
        assert!(f.fallback.iter().all(|&b| b));

        let mut wd = PslpState::new();
        wd.refit_series(&day_series(5, |i| i as f64), &h, ts(6, 0, 0));
        // Sunday 2019-03-10 requested
        let f = wd.forecast(ts(10, 0, 0), SLOTS_PER_DAY, 300, &h).unwrap();
        assert!(f.any_fallback());
        assert_eq!(
            f.series.values,
            (0..SLOTS_PER_DAY).map(|i| i as f64).collect::<Vec<_>>()
        );
    }

    #[test]
    fn empty_state_is_cold() {
        let st = PslpState::new();
        assert!(matches!(
            st.forecast(ts(5, 0, 0), 1, 300, &HolidaySet::default()),
            Err(Error::NotFitted(_))
        ));
    }

    #[test]
    fn partial_bucket_uses_other_buckets_per_slot() {
        let h = HolidaySet::default();
        let mut st = PslpState::new();
        st.refit_series(&day_series(4, |_| 2.0), &h, ts(5, 0, 0));
        // only the first half of Tuesday absorbed into the same bucket
        st.refit_series(&day_series(5, |_| 4.0), &h, ts(5, 12, 0));
        let f = st.forecast(ts(6, 0, 0), SLOTS_PER_DAY, 300, &h).unwrap();
        assert_eq!(f.series.values[0], 3.0);
        assert_eq!(f.series.values[200], 2.0);
        assert!(!f.any_fallback());
    }
}
