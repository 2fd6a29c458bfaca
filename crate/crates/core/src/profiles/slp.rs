use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::calendar::{classify_day, DayClass, HolidaySet, Season};
use crate::error::{Error, Result};
use crate::timeseries::{LoadSeries, Timestamp};

pub const QUARTER_HOURS: usize = 96;

/// Year used to check the 1000 kWh/a normalization of a profile set.
pub const REFERENCE_YEAR: i32 = 2019;

const NORMALIZED_KWH: f64 = 1000.0;
const NORMALIZATION_TOLERANCE: f64 = 0.005;

/// Nine quarter-hour day curves (season x day class), in watts for a
/// consumer with an annual consumption of 1000 kWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlpProfileSet {
    pub label: String,
    curves: Vec<Vec<f64>>,
}

fn curve_index(season: Season, class: DayClass) -> usize {
    season.index() * 3 + class.index()
}

impl SlpProfileSet {
    pub fn new(label: impl Into<String>, curves: Vec<Vec<f64>>) -> Result<Self> {
        if curves.len() != 9 || curves.iter().any(|c| c.len() != QUARTER_HOURS) {
            return Err(Error::Profile("expected 9 curves of 96 quarter-hour values".into()));
        }
        if curves.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Profile("profile values must be finite and non-negative".into()));
        }
        Ok(SlpProfileSet {
            label: label.into(),
            curves,
        })
    }

    /// Bundled commercial profile shaped like the G1 class (working days
    /// 08-18 h), normalized to 1000 kWh over [`REFERENCE_YEAR`].
    pub fn g1_like() -> Self {
        let ramp = |h: f64, from: f64, to: f64| ((h - from) / (to - from)).clamp(0.0, 1.0);
        let mut curves = Vec::with_capacity(9);
        for season in Season::ALL {
            let season_factor = match season {
                Season::Winter => 1.12,
                Season::Transition => 1.0,
                Season::Summer => 0.9,
            };
            for class in DayClass::ALL {
                let curve = (0..QUARTER_HOURS)
                    .map(|q| {
                        let h = (q as f64 + 0.5) / 4.0;
                        let activity = match class {
                            DayClass::Weekday => {
                                let on = ramp(h, 6.5, 8.0) * (1.0 - ramp(h, 18.0, 19.5));
                                let lunch = 0.08 * (-(h - 12.5).powi(2) / 0.5).exp();
                                on * (1.0 + lunch)
                            }
                            DayClass::Saturday => 0.45 * ramp(h, 7.5, 9.0) * (1.0 - ramp(h, 13.0, 14.5)),
                            DayClass::Sunday => 0.0,
                        };
                        season_factor * (0.28 + 0.72 * activity)
                    })
                    .collect();
                curves.push(curve);
            }
        }
        let mut set = SlpProfileSet {
            label: "G1-like".into(),
            curves,
        };
        let scale = NORMALIZED_KWH / set.annual_energy_kwh(REFERENCE_YEAR, &HolidaySet::default());
        for v in set.curves.iter_mut().flatten() {
            *v *= scale;
        }
        set
    }

    pub fn curve(&self, season: Season, class: DayClass) -> &[f64] {
        &self.curves[curve_index(season, class)]
    }

    /// Profile value in watts covering `ts` (quarter-hour hold).
    pub fn value_at(&self, ts: Timestamp, holidays: &HolidaySet) -> f64 {
        let (season, class) = classify_day(ts.date(), holidays);
        self.curve(season, class)[(ts.second_of_day() / 900) as usize]
    }

    /// Energy in kWh obtained by applying the profiles over a calendar year.
    pub fn annual_energy_kwh(&self, year: i32, holidays: &HolidaySet) -> f64 {
        let mut date = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year");
        let mut wh = 0.0;
        while date.year() == year {
            let (season, class) = classify_day(date, holidays);
            wh += self.curve(season, class).iter().sum::<f64>() * 0.25;
            date = date.succ_opt().expect("date in range");
        }
        wh / 1000.0
    }

    /// Fails when the reference-year energy is off 1000 kWh by more than 0.5 %.
    pub fn validate_normalization(&self) -> Result<()> {
        let kwh = self.annual_energy_kwh(REFERENCE_YEAR, &HolidaySet::default());
        if (kwh - NORMALIZED_KWH).abs() > NORMALIZATION_TOLERANCE * NORMALIZED_KWH {
            return Err(Error::Profile(format!(
                "profile integrates to {kwh:.2} kWh over {REFERENCE_YEAR}, expected 1000 kWh within 0.5%"
            )));
        }
        Ok(())
    }

    /// Reads `season,day_class,slot_index,power_w_per_1000kwh` rows.
    pub fn read_csv(label: impl Into<String>, reader: impl Read) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            season: String,
            day_class: String,
            slot_index: usize,
            power_w_per_1000kwh: f64,
        }
        let mut curves = vec![vec![f64::NAN; QUARTER_HOURS]; 9];
        let mut seen = vec![false; 9 * QUARTER_HOURS];
        let mut rdr = csv::Reader::from_reader(reader);
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::Profile(format!("line {line}: {e}")))?;
            let season: Season = row.season.parse()?;
            let class: DayClass = row.day_class.parse()?;
            if row.slot_index >= QUARTER_HOURS {
                return Err(Error::Profile(format!(
                    "line {line}: slot index {} out of range",
                    row.slot_index
                )));
            }
            let c = curve_index(season, class);
            let flat = c * QUARTER_HOURS + row.slot_index;
            if seen[flat] {
                return Err(Error::Profile(format!(
                    "line {line}: duplicate {season}/{class}/{}",
                    row.slot_index
                )));
            }
            seen[flat] = true;
            curves[c][row.slot_index] = row.power_w_per_1000kwh;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Profile(format!(
                "missing row for curve {} slot {}",
                missing / QUARTER_HOURS,
                missing % QUARTER_HOURS
            )));
        }
        let set = SlpProfileSet::new(label, curves)?;
        set.validate_normalization()?;
        Ok(set)
    }

    pub fn write_csv(&self, mut writer: impl Write) -> std::io::Result<()> {
        writeln!(writer, "season,day_class,slot_index,power_w_per_1000kwh")?;
        for season in Season::ALL {
            for class in DayClass::ALL {
                for (slot, v) in self.curve(season, class).iter().enumerate() {
                    writeln!(writer, "{season},{class},{slot},{v}")?;
                }
            }
        }
        Ok(())
    }
}

/// Annual consumption estimated from the mean power over a partial period.
pub fn annual_kwh_from_mean_power(mean_w: f64) -> f64 {
    mean_w * 8760.0 / 1000.0
}

/// Applies the profile for each step's season, day class and quarter hour,
/// scaled by `annual_kwh / 1000`.
pub fn slp_forecast(
    profiles: &SlpProfileSet,
    annual_kwh: f64,
    start: Timestamp,
    steps: usize,
    step_seconds: i64,
    holidays: &HolidaySet,
) -> Result<LoadSeries> {
    if !(annual_kwh > 0.0 && annual_kwh.is_finite()) {
        return Err(Error::Config(format!(
            "annual consumption must be positive, got {annual_kwh}"
        )));
    }
    if start.year() < 1 {
        return Err(Error::Config(format!("horizon start {start} precedes year 1")));
    }
    let scale = annual_kwh / NORMALIZED_KWH;
    let values = (0..steps)
        .map(|k| profiles.value_at(start.plus(k as i64 * step_seconds), holidays) * scale)
        .collect();
    LoadSeries::new(start, step_seconds, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_profile_is_normalized_for_other_years() {
        let p = SlpProfileSet::g1_like();
        p.validate_normalization().unwrap();
        for year in [2015, 2017, 2018, 2021, 2022, 2023] {
            let kwh = p.annual_energy_kwh(year, &HolidaySet::default());
            assert!((kwh - 1000.0).abs() <= 5.0, "{year}: {kwh}");
        }
    }

    #[test]
    fn workday_plateau_is_higher_than_night() {
        let p = SlpProfileSet::g1_like();
        let wd = p.curve(Season::Transition, DayClass::Weekday);
        assert!(wd[48] > 2.0 * wd[8]);
        let sun = p.curve(Season::Transition, DayClass::Sunday);
        assert!(sun.iter().all(|&v| (v - sun[0]).abs() < 1e-12));
    }

    #[test]
    fn scaling_and_hold() {
        let p = SlpProfileSet::g1_like();
        let h = HolidaySet::default();
        let start = Timestamp::from_ymd_hms(2019, 3, 5, 9, 0, 0).unwrap();
        let raw = slp_forecast(&p, 1000.0, start, 288, 300, &h).unwrap();
        let md = slp_forecast(&p, 174_240.0, start, 288, 300, &h).unwrap();
        for (a, b) in raw.values.iter().zip(&md.values) {
            assert!((b - a * 174.24).abs() <= 1e-9 * b.abs());
        }
        assert_eq!(raw.values[0], p.curve(Season::Winter, DayClass::Weekday)[36]);
        assert_eq!(raw.values[0], raw.values[1]);
        assert_eq!(raw.values[1], raw.values[2]);
        let q = slp_forecast(&p, 500.0, start, 288, 300, &h).unwrap();
        let q2 = slp_forecast(&p, 1000.0, start, 288, 300, &h).unwrap();
        for (a, b) in q.values.iter().zip(&q2.values) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn rejects_bad_annual() {
        let p = SlpProfileSet::g1_like();
        let start = Timestamp::from_ymd_hms(2019, 3, 5, 9, 0, 0).unwrap();
        assert!(slp_forecast(&p, 0.0, start, 1, 300, &HolidaySet::default()).is_err());
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let p = SlpProfileSet::g1_like();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = SlpProfileSet::read_csv("G1-like", buf.as_slice()).unwrap();
        assert_eq!(back, p);

        let text = String::from_utf8(buf).unwrap();
        let doubled: String = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                if i == 0 {
                    format!("{l}\n")
                } else {
                    let (head, v) = l.rsplit_once(',').unwrap();
                    format!("{head},{}\n", v.parse::<f64>().unwrap() * 2.0)
                }
            })
            .collect();
        assert!(SlpProfileSet::read_csv("x", doubled.as_bytes()).is_err());
        let truncated: String = text.lines().take(100).map(|l| format!("{l}\n")).collect();
        assert!(SlpProfileSet::read_csv("x", truncated.as_bytes()).is_err());
    }
}
