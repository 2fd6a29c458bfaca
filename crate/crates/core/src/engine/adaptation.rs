use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::SimulationRun;
use crate::error::{Error, Result};
use crate::timeseries::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptationThresholds {
    /// A day is a spike when its mean MAE exceeds this multiple of the baseline.
    pub spike_factor: f64,
    /// Adapted once a day's mean MAE falls to this multiple of the baseline.
    pub adapted_factor: f64,
    /// Days before the event that form the baseline.
    pub baseline_days: i64,
    /// Days from the event on that are reported.
    pub follow_days: i64,
    /// A spike must begin within this many days of the event.
    pub spike_window_days: i64,
}

impl Default for AdaptationThresholds {
    fn default() -> Self {
        AdaptationThresholds {
            spike_factor: 2.0,
            adapted_factor: 1.25,
            baseline_days: 7,
            follow_days: 14,
            spike_window_days: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Before,
    Spike,
    Adaptation,
    Adapted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyError {
    pub date: NaiveDate,
    pub mae_w: f64,
    pub issuances: usize,
    /// `None` when no baseline could be formed.
    pub phase: Option<Phase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTrajectory {
    pub forecaster: String,
    pub event: NaiveDate,
    pub baseline_mae_w: Option<f64>,
    pub spike_start: Option<NaiveDate>,
    pub adapted_at: Option<NaiveDate>,
    pub days: Vec<DailyError>,
}

/// Daily mean MAE around each event for every forecaster, labelled spike,
/// adaptation and adapted by comparing against the mean over the
/// baseline days before the event.
pub fn adaptation_report(
    run: &SimulationRun,
    events: &[NaiveDate],
    thresholds: &AdaptationThresholds,
) -> Result<Vec<EventTrajectory>> {
    let first = run.start.date();
    let last = run.start.plus((run.steps.max(1) as i64 - 1) * run.step_seconds).date();
    let mut out = Vec::new();
    for &event in events {
        if event < first || event > last {
            return Err(Error::Coverage {
                what: "simulation run",
                at: Timestamp::from_date(event),
            });
        }
        for log in &run.forecasters {
            let mut daily: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
            for r in &log.reports {
                let e = daily.entry(r.issued_at.date()).or_default();
                e.0 += r.mae_w;
                e.1 += 1;
            }
            let lo = event - chrono::Duration::days(thresholds.baseline_days);
            let hi = event + chrono::Duration::days(thresholds.follow_days);
            let days: Vec<(NaiveDate, f64, usize)> = daily
                .range(lo..hi)
                .map(|(&d, &(sum, n))| (d, sum / n as f64, n))
                .collect();
            let before: Vec<f64> = days.iter().filter(|d| d.0 < event).map(|d| d.1).collect();
            let baseline = (!before.is_empty()).then(|| before.iter().sum::<f64>() / before.len() as f64);
            let (phases, spike_start, adapted_at) = match baseline {
                Some(b) => label(&days, event, b, thresholds),
                None => (vec![None; days.len()], None, None),
            };
            out.push(EventTrajectory {
                forecaster: log.name.clone(),
                event,
                baseline_mae_w: baseline,
                spike_start,
                adapted_at,
                days: days
                    .iter()
                    .zip(phases)
                    .map(|(&(date, mae_w, issuances), phase)| DailyError {
                        date,
                        mae_w,
                        issuances,
                        phase,
                    })
                    .collect(),
            });
        }
    }
    Ok(out)
}

type Labels = (Vec<Option<Phase>>, Option<NaiveDate>, Option<NaiveDate>);

fn label(days: &[(NaiveDate, f64, usize)], event: NaiveDate, baseline: f64, t: &AdaptationThresholds) -> Labels {
    let spike_limit = t.spike_factor * baseline;
    let adapted_limit = t.adapted_factor * baseline;
    let latest_spike = event + chrono::Duration::days(t.spike_window_days);
    let post = days.iter().position(|d| d.0 >= event).unwrap_or(days.len());
    let mut phases: Vec<Option<Phase>> = vec![Some(Phase::Before); post];
    let spike = days[post..]
        .iter()
        .position(|d| d.1 > spike_limit)
        .map(|i| post + i)
        .filter(|&i| days[i].0 < latest_spike);
    let Some(spike) = spike else {
        phases.extend(std::iter::repeat_n(Some(Phase::Adapted), days.len() - post));
        return (phases, None, days.get(post).map(|d| d.0));
    };
    // days between the event and the spike count as adapted
    phases.extend(std::iter::repeat_n(Some(Phase::Adapted), spike - post));
    let mut i = spike;
    while i < days.len() && days[i].1 > spike_limit {
        phases.push(Some(Phase::Spike));
        i += 1;
    }
    let mut adapted_at = None;
    while i < days.len() {
        if adapted_at.is_none() && days[i].1 <= adapted_limit {
            adapted_at = Some(days[i].0);
        }
        phases.push(Some(if adapted_at.is_some() {
            Phase::Adapted
        } else {
            Phase::Adaptation
        }));
        i += 1;
    }
    (phases, Some(days[spike].0), adapted_at)
}
