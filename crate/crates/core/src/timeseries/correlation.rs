use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::features::{FeatureMatrix, FEATURE_NAMES};
use crate::error::{Error, Result};

/// Pearson correlation with the `1/(n-1)` sample covariance and sample
/// standard deviations.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::EmptyInput("pearson needs at least two pairs"));
    }
    let mean_a = a.iter().sum::<f64>() / n as f64;
    let mean_b = b.iter().sum::<f64>() / n as f64;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (da, db) = (x - mean_a, y - mean_b);
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 {
        return Err(Error::UndefinedCorrelation("first"));
    }
    if var_b == 0.0 {
        return Err(Error::UndefinedCorrelation("second"));
    }
    // The 1/(n-1) factors of covariance and both deviations cancel.
    let r = cov / (var_a.sqrt() * var_b.sqrt());
    Ok(r.clamp(-1.0, 1.0))
}

/// Correlation of every feature (and the load itself) with the load, per
/// calendar month and over the whole matrix. Cells whose correlation is
/// undefined are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub features: Vec<String>,
    /// `(year, month)` in chronological order.
    pub months: Vec<(i32, u32)>,
    /// `monthly[feature][month]`.
    pub monthly: Vec<Vec<Option<f64>>>,
    pub overall: Vec<Option<f64>>,
}

pub fn monthly_correlation_report(matrix: &FeatureMatrix) -> Result<CorrelationReport> {
    let targets = matrix.targets()?;
    let columns: Vec<Vec<f64>> = (0..FEATURE_NAMES.len())
        .map(|c| matrix.rows.iter().map(|r| r.features()[c]).collect())
        .chain(std::iter::once(targets.clone()))
        .collect();

    let mut groups: BTreeMap<(i32, u32), Vec<usize>> = BTreeMap::new();
    for (i, ts) in matrix.timestamps.iter().enumerate() {
        groups.entry((ts.year(), ts.month())).or_default().push(i);
    }

    let cell = |col: &[f64], idx: Option<&[usize]>| -> Option<f64> {
        match idx {
            Some(idx) => {
                let a: Vec<f64> = idx.iter().map(|&i| col[i]).collect();
                let b: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
                pearson(&a, &b).ok()
            }
            None => pearson(col, &targets).ok(),
        }
    };

    let monthly = columns
        .iter()
        .map(|col| groups.values().map(|idx| cell(col, Some(idx))).collect())
        .collect();
    let overall = columns.iter().map(|col| cell(col, None)).collect();
    let mut features: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    features.push("load".to_string());
    Ok(CorrelationReport {
        features,
        months: groups.keys().copied().collect(),
        monthly,
        overall,
    })
}

impl CorrelationReport {
    /// CSV with one row per feature, one column per month and a final
    /// `overall` column; undefined cells are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature");
        for (y, m) in &self.months {
            out.push_str(&format!(",{y:04}-{m:02}"));
        }
        out.push_str(",overall\n");
        for (f, name) in self.features.iter().enumerate() {
            out.push_str(name);
            for cell in self.monthly[f].iter().chain(std::iter::once(&self.overall[f])) {
                out.push(',');
                if let Some(v) = cell {
                    out.push_str(&format!("{v:.6}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct evaluation of the covariance and correlation formulas.
    fn oracle(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0);
        let sd = |v: &[f64], m: f64| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        cov / (sd(a, ma) * sd(b, mb))
    }

    #[test]
    fn hand_example() {
        // a = [1,2,3], b = [2,4,7]: cov = 2.5, sd_a = 1, sd_b = sqrt(6.333..)
        let expected = 2.5 / (19.0f64 / 3.0).sqrt();
        assert!((oracle(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]) - expected).abs() < 1e-15);
        let r = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]).unwrap();
        assert!((r - 0.993_399_267_798_783).abs() < 1e-12, "{r}");
    }

    #[test]
    fn self_and_negated() {
        let a = [3.0, 1.0, 4.0, 1.0, 5.0];
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_is_undefined() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn matches_oracle_and_invariances(
            pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..50),
            alpha in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            beta in -50.0f64..50.0,
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let r = pearson(&a, &b).unwrap();
            prop_assert!((-1.0..=1.0).contains(&r));
            prop_assert!((r - oracle(&a, &b)).abs() < 1e-9);
            prop_assert!((r - pearson(&b, &a).unwrap()).abs() < 1e-12);
            let scaled: Vec<f64> = a.iter().map(|x| alpha * x + beta).collect();
            let rs = pearson(&scaled, &b).unwrap();
            prop_assert!((rs - alpha.signum() * r).abs() < 1e-9);
        }
    }
}
