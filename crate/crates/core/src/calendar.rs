//! Seasons, day classes and public holidays used by the load profiles.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Season {
    Summer,
    Transition,
    Winter,
}

impl Season {
    pub const ALL: [Season; 3] = [Season::Summer, Season::Transition, Season::Winter];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Summer 15/05-14/09, transition 21/03-14/05 and 15/09-31/10, winter
    /// 01/11-20/03.
    pub fn of(date: NaiveDate) -> Season {
        let md = (date.month(), date.day());
        if ((5, 15)..=(9, 14)).contains(&md) {
            Season::Summer
        } else if ((3, 21)..=(5, 14)).contains(&md) || ((9, 15)..=(10, 31)).contains(&md) {
            Season::Transition
        } else {
            Season::Winter
        }
    }

    /// Seasons in the order they were last seen walking backwards in time
    /// from `date`, starting with the season of `date` itself. Spring
    /// transition looks back to winter, autumn transition to summer.
    pub fn backward_chain(date: NaiveDate) -> [Season; 3] {
        match Season::of(date) {
            Season::Winter => [Season::Winter, Season::Transition, Season::Summer],
            Season::Summer => [Season::Summer, Season::Transition, Season::Winter],
            Season::Transition if date.month() <= 6 => [Season::Transition, Season::Winter, Season::Summer],
            Season::Transition => [Season::Transition, Season::Summer, Season::Winter],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Season::Summer => "summer",
            Season::Transition => "transition",
            Season::Winter => "winter",
        }
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Season {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "summer" => Ok(Season::Summer),
            "transition" => Ok(Season::Transition),
            "winter" => Ok(Season::Winter),
            other => Err(Error::Profile(format!("unknown season {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DayClass {
    Weekday,
    Saturday,
    Sunday,
}

impl DayClass {
    pub const ALL: [DayClass; 3] = [DayClass::Weekday, DayClass::Saturday, DayClass::Sunday];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DayClass::Weekday => "weekday",
            DayClass::Saturday => "saturday",
            DayClass::Sunday => "sunday",
        }
    }
}

impl fmt::Display for DayClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DayClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "weekday" => Ok(DayClass::Weekday),
            "saturday" => Ok(DayClass::Saturday),
            "sunday" => Ok(DayClass::Sunday),
            other => Err(Error::Profile(format!("unknown day class {other:?}"))),
        }
    }
}

/// Set of public holiday dates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HolidaySet(BTreeSet<NaiveDate>);

impl HolidaySet {
    pub fn from_dates(dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        HolidaySet(dates.into_iter().collect())
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.0.contains(&date)
    }

    pub fn insert(&mut self, date: NaiveDate) {
        self.0.insert(date);
    }

    pub fn iter(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// One ISO date per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> std::result::Result<Self, (usize, String)> {
        let mut set = HolidaySet::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let date =
                NaiveDate::parse_from_str(line, "%Y-%m-%d").map_err(|e| (i + 1, format!("bad date {line:?}: {e}")))?;
            set.insert(date);
        }
        Ok(set)
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|d| format!("{}\n", d.format("%Y-%m-%d"))).collect()
    }

    /// Nation-wide German public holidays for the given years.
    pub fn german_national(years: impl IntoIterator<Item = i32>) -> Self {
        let mut set = HolidaySet::default();
        for year in years {
            let easter = easter_sunday(year);
            let fixed = [(1, 1), (5, 1), (10, 3), (12, 25), (12, 26)];
            for (m, d) in fixed {
                set.insert(NaiveDate::from_ymd_opt(year, m, d).expect("fixed holiday"));
            }
            for offset in [-2, 1, 39, 50] {
                set.insert(easter + Duration::days(offset));
            }
        }
        set
    }
}

/// Gregorian Easter Sunday (anonymous Gregorian algorithm).
pub fn easter_sunday(year: i32) -> NaiveDate {
    let a = year % 19;
    let b = year / 100;
    let c = year % 100;
    let d = b / 4;
    let e = b % 4;
    let f = (b + 8) / 25;
    let g = (b - f + 1) / 3;
    let h = (19 * a + b - d - g + 15) % 30;
    let i = c / 4;
    let k = c % 4;
    let l = (32 + 2 * e + 2 * i - h - k) % 7;
    let m = (a + 11 * h + 22 * l) / 451;
    let month = (h + l - 7 * m + 114) / 31;
    let day = (h + l - 7 * m + 114) % 31 + 1;
    NaiveDate::from_ymd_opt(year, month as u32, day as u32).expect("valid Easter date")
}

fn is_christmas_or_new_year(date: NaiveDate) -> bool {
    matches!((date.month(), date.day()), (12, 25) | (1, 1))
}

/// Season and profile day class of a date.
///
/// Holidays count as Sundays. Christmas Day and New Year's Day count as
/// Saturdays unless they fall on a Sunday, whether or not they are listed
/// in `holidays`.
pub fn classify_day(date: NaiveDate, holidays: &HolidaySet) -> (Season, DayClass) {
    let weekday = date.weekday();
    let class = if is_christmas_or_new_year(date) {
        if weekday == Weekday::Sun {
            DayClass::Sunday
        } else {
            DayClass::Saturday
        }
    } else if holidays.contains(date) || weekday == Weekday::Sun {
        DayClass::Sunday
    } else if weekday == Weekday::Sat {
        DayClass::Saturday
    } else {
        DayClass::Weekday
    };
    (Season::of(date), class)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn season_boundaries() {
        assert_eq!(Season::of(d(2019, 3, 20)), Season::Winter);
        assert_eq!(Season::of(d(2019, 3, 21)), Season::Transition);
        assert_eq!(Season::of(d(2019, 5, 14)), Season::Transition);
        assert_eq!(Season::of(d(2019, 5, 15)), Season::Summer);
        assert_eq!(Season::of(d(2019, 9, 14)), Season::Summer);
        assert_eq!(Season::of(d(2019, 9, 15)), Season::Transition);
        assert_eq!(Season::of(d(2019, 10, 31)), Season::Transition);
        assert_eq!(Season::of(d(2019, 11, 1)), Season::Winter);
        assert_eq!(Season::of(d(2020, 2, 29)), Season::Winter);
    }

    #[test]
    fn holiday_rules() {
        let empty = HolidaySet::default();
        // 2019-05-01 was a Wednesday
        let may_day = HolidaySet::from_dates([d(2019, 5, 1)]);
        assert_eq!(classify_day(d(2019, 5, 1), &may_day).1, DayClass::Sunday);
        assert_eq!(classify_day(d(2019, 5, 1), &empty).1, DayClass::Weekday);
        // 2019-12-25 was a Wednesday, 2022-12-25 a Sunday
        assert_eq!(classify_day(d(2019, 12, 25), &empty).1, DayClass::Saturday);
        assert_eq!(classify_day(d(2022, 12, 25), &empty).1, DayClass::Sunday);
        let xmas = HolidaySet::german_national([2019]);
        assert_eq!(classify_day(d(2019, 12, 25), &xmas).1, DayClass::Saturday);
        assert_eq!(classify_day(d(2019, 12, 26), &xmas).1, DayClass::Sunday);
        // 2019-01-01 Tuesday
        assert_eq!(classify_day(d(2019, 1, 1), &xmas).1, DayClass::Saturday);
        assert_eq!(classify_day(d(2019, 3, 9), &empty).1, DayClass::Saturday);
        assert_eq!(classify_day(d(2019, 3, 10), &empty).1, DayClass::Sunday);
    }

    #[test]
    fn seasons_partition_every_day() {
        for year in [2019, 2020] {
            let mut date = d(year, 1, 1);
            let mut counts = [0usize; 3];
            while date.year() == year {
                counts[Season::of(date).index()] += 1;
                date = date.succ_opt().unwrap();
            }
            let leap = if year == 2020 { 1 } else { 0 };
            // summer 15/05-14/09 = 123 days, transition 55 + 47 days
            assert_eq!(counts, [123, 102, 140 + leap]);
        }
    }

    #[test]
    fn easter_dates() {
        assert_eq!(easter_sunday(2019), d(2019, 4, 21));
        assert_eq!(easter_sunday(2020), d(2020, 4, 12));
        assert_eq!(easter_sunday(2024), d(2024, 3, 31));
        let h = HolidaySet::german_national([2019]);
        assert!(h.contains(d(2019, 4, 19)) && h.contains(d(2019, 4, 22)));
        assert!(h.contains(d(2019, 5, 30)) && h.contains(d(2019, 6, 10)));
        assert_eq!(h.len(), 9);
    }

    #[test]
    fn backward_chain_looks_at_prior_season_first() {
        assert_eq!(Season::backward_chain(d(2019, 4, 1))[1], Season::Winter);
        assert_eq!(Season::backward_chain(d(2019, 10, 1))[1], Season::Summer);
        assert_eq!(Season::backward_chain(d(2019, 7, 1))[1], Season::Transition);
        assert_eq!(Season::backward_chain(d(2019, 12, 1))[1], Season::Transition);
    }

    #[test]
    fn holiday_file_parse() {
        let set = HolidaySet::parse("# comment\n2019-12-25\n\n2019-12-26 # boxing day\n").unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(HolidaySet::parse("2019-13-01").unwrap_err().0, 1);
        assert_eq!(HolidaySet::parse(&set.to_text()).unwrap(), set);
    }
}
