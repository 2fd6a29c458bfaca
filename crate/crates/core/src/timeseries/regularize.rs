use serde::{Deserialize, Serialize};

use super::{LoadSeries, Timestamp};
use crate::error::{Error, Result};

/// What [`regularize`] had to repair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    /// Grid slots in the output.
    pub slots: usize,
    /// Slots without a valid reading of their own (filled by interpolation
    /// or by the nearest valid value at the edges).
    pub missing_slots: usize,
    /// Longest run of consecutive missing slots.
    pub longest_gap: usize,
    /// Raw readings discarded because a later reading had the same timestamp.
    pub duplicates: usize,
    /// Raw readings that were non-finite or negative.
    pub invalid: usize,
    /// The raw input was not in ascending timestamp order.
    pub reordered: bool,
}

/// Puts irregular readings on a uniform grid starting at the earliest
/// timestamp.
///
/// Duplicates keep the last reading in input order. Non-finite and negative
/// readings count as missing. Interior gaps are filled by linear
/// interpolation between the nearest valid neighbours, leading and trailing
/// gaps by the nearest valid value.
pub fn regularize(raw: &[(Timestamp, f64)], step_seconds: i64) -> Result<(LoadSeries, GapReport)> {
    regularize_with(raw, step_seconds, |v| v.is_finite() && v >= 0.0)
}

/// [`regularize`] with a caller-defined notion of a valid reading.
pub fn regularize_with(
    raw: &[(Timestamp, f64)],
    step_seconds: i64,
    is_valid: impl Fn(f64) -> bool,
) -> Result<(LoadSeries, GapReport)> {
    if raw.is_empty() {
        return Err(Error::EmptyInput("raw readings"));
    }
    if step_seconds <= 0 {
        return Err(Error::Config(format!("step must be positive, got {step_seconds}")));
    }
    let mut report = GapReport {
        reordered: raw.windows(2).any(|w| w[1].0 < w[0].0),
        ..GapReport::default()
    };

    // Stable sort keeps input order among equal timestamps, so the last
    // element of each run is the last reading received.
    let mut sorted = raw.to_vec();
    sorted.sort_by_key(|&(ts, _)| ts);
    let mut valid: Vec<(Timestamp, f64)> = Vec::with_capacity(sorted.len());
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].0 == sorted[i].0 {
            j += 1;
        }
        report.duplicates += j - i;
        let (ts, v) = sorted[j];
        if is_valid(v) {
            valid.push((ts, v));
        }
        i = j + 1;
    }
    report.invalid = raw.iter().filter(|(_, v)| !is_valid(*v)).count();
    if valid.is_empty() {
        return Err(Error::AllMissing);
    }

    let start = sorted[0].0;
    let end = sorted[sorted.len() - 1].0;
    let n = ((end.0 - start.0) / step_seconds) as usize + 1;
    let mut values = Vec::with_capacity(n);
    let mut next = 0usize; // first valid point with ts >= slot
    let mut run = 0usize;
    for k in 0..n {
        let t = start.0 + k as i64 * step_seconds;
        while next < valid.len() && valid[next].0 .0 < t {
            next += 1;
        }
        let exact = next < valid.len() && valid[next].0 .0 == t;
        let value = if exact {
            valid[next].1
        } else if next == 0 {
            valid[0].1
        } else if next == valid.len() {
            valid[valid.len() - 1].1
        } else {
            let (t0, v0) = valid[next - 1];
            let (t1, v1) = valid[next];
            let frac = (t - t0.0) as f64 / (t1.0 - t0.0) as f64;
            v0 + (v1 - v0) * frac
        };
        if exact {
            run = 0;
        } else {
            report.missing_slots += 1;
            run += 1;
            report.longest_gap = report.longest_gap.max(run);
        }
        values.push(value);
    }
    report.slots = n;
    Ok((
        LoadSeries {
            start,
            step_seconds,
            values,
        },
        report,
    ))
}

/// Aggregates to a coarser step by averaging each block of covered values.
///
/// A trailing partial block is dropped.
pub fn resample(series: &LoadSeries, new_step_seconds: i64) -> Result<LoadSeries> {
    if new_step_seconds <= 0 || new_step_seconds % series.step_seconds != 0 {
        return Err(Error::StepRatio {
            from: series.step_seconds,
            to: new_step_seconds,
        });
    }
    let ratio = (new_step_seconds / series.step_seconds) as usize;
    let values = series
        .values
        .chunks_exact(ratio)
        .map(|block| block.iter().sum::<f64>() / ratio as f64)
        .collect();
    Ok(LoadSeries {
        start: series.start,
        step_seconds: new_step_seconds,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(items: &[(i64, f64)]) -> Vec<(Timestamp, f64)> {
        items.iter().map(|&(t, v)| (Timestamp(t), v)).collect()
    }

    #[test]
    fn interpolates_interior_gap() {
        let (s, rep) = regularize(&pairs(&[(0, 10.0), (600, 30.0)]), 300).unwrap();
        assert_eq!(s.values, vec![10.0, 20.0, 30.0]);
        assert_eq!(rep.missing_slots, 1);
        assert_eq!(rep.longest_gap, 1);
    }

    #[test]
    fn uniform_input_is_unchanged() {
        let raw = pairs(&[(0, 1.0), (300, 2.0), (600, 3.0), (900, 2.5)]);
        let (s, rep) = regularize(&raw, 300).unwrap();
        assert_eq!(s.values, vec![1.0, 2.0, 3.0, 2.5]);
        assert_eq!(rep.missing_slots, 0);
        assert_eq!(rep.duplicates, 0);
        assert!(!rep.reordered);
    }

    #[test]
    fn duplicates_keep_last() {
        let (s, rep) = regularize(&pairs(&[(0, 1.0), (300, 5.0), (300, 7.0), (600, 1.0)]), 300).unwrap();
        assert_eq!(s.values[1], 7.0);
        assert_eq!(rep.duplicates, 1);
    }

    #[test]
    fn invalid_readings_are_missing_and_edges_hold() {
        let raw = pairs(&[
            (0, f64::NAN),
            (300, 4.0),
            (600, -1.0),
            (900, 8.0),
            (1200, f64::INFINITY),
        ]);
        let (s, rep) = regularize(&raw, 300).unwrap();
        assert_eq!(s.values, vec![4.0, 4.0, 6.0, 8.0, 8.0]);
        assert_eq!(rep.invalid, 3);
        assert_eq!(rep.missing_slots, 3);
        assert_eq!(rep.longest_gap, 1);
    }

    #[test]
    fn reversed_rows_are_sorted_and_flagged() {
        let (s, rep) = regularize(&pairs(&[(600, 3.0), (300, 2.0), (0, 1.0)]), 300).unwrap();
        assert_eq!(s.values, vec![1.0, 2.0, 3.0]);
        assert!(rep.reordered);
    }

    #[test]
    fn errors() {
        assert!(matches!(regularize(&[], 300), Err(Error::EmptyInput(_))));
        assert!(matches!(
            regularize(&pairs(&[(0, f64::NAN), (300, -2.0)]), 300),
            Err(Error::AllMissing)
        ));
    }

    #[test]
    fn resample_means() {
        let s = LoadSeries::new(Timestamp(0), 300, vec![10.0, 30.0]).unwrap();
        assert_eq!(resample(&s, 600).unwrap().values, vec![20.0]);
        let flat = LoadSeries::new(Timestamp(0), 1, vec![4.0; 900]).unwrap();
        assert_eq!(resample(&flat, 300).unwrap().values, vec![4.0; 3]);
        assert!(matches!(resample(&s, 450), Err(Error::StepRatio { .. })));
    }
}
