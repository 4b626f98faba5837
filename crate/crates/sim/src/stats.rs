//! Empirical CDFs and percentiles of pooled per-user SE.

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::runner::{RecordStatus, ResultRecord};

/// Percentiles reported in every summary table.
pub const PERCENTILES: [f64; 7] = [5.0, 10.0, 25.0, 50.0, 75.0, 90.0, 95.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfStats {
    pub samples: usize,
    /// `(value, rank / n)` with ranks starting at 1.
    pub cdf: Vec<(f64, f64)>,
    /// `(percentile, value)` for each entry of [`PERCENTILES`].
    pub percentiles: Vec<(f64, f64)>,
    pub mean: f64,
}

impl CdfStats {
    /// The per-user SE that 95% of users reach or exceed.
    pub fn likely_95(&self) -> f64 {
        self.percentile(5.0).expect("5th percentile is always tabulated")
    }

    pub fn percentile(&self, p: f64) -> Option<f64> {
        self.percentiles.iter().find(|(q, _)| *q == p).map(|(_, v)| *v)
    }
}

/// Percentile of sorted data with linear interpolation between order
/// statistics: position `(n - 1) p / 100`, as in numpy's default.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let pos = (sorted.len() - 1) as f64 * p.clamp(0.0, 100.0) / 100.0;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn stats_from_samples(mut samples: Vec<f64>) -> Result<CdfStats, HarnessError> {
    if samples.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(HarnessError::Format("NaN spectral efficiency".into()));
    }
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let cdf = samples
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, (i + 1) as f64 / n as f64))
        .collect();
    let percentiles = PERCENTILES
        .iter()
        .map(|&p| (p, percentile_sorted(&samples, p)))
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    Ok(CdfStats {
        samples: n,
        cdf,
        percentiles,
        mean,
    })
}

/// Pools the per-user SE of all records that were evaluated. Records with
/// status `error` carry no measurement and are left out; infeasible drops
/// count with zero SE.
pub fn cdf_stats(records: &[ResultRecord]) -> Result<CdfStats, HarnessError> {
    let samples = records
        .iter()
        .filter(|r| r.status != RecordStatus::Error)
        .flat_map(|r| r.se.iter().copied())
        .collect();
    stats_from_samples(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifth_percentile_of_one_to_hundred() {
        let s = stats_from_samples((1..=100).map(f64::from).collect()).unwrap();
        assert!((s.likely_95() - 5.95).abs() < 1e-12);
        assert_eq!(s.percentile(50.0), Some(50.5));
    }

    #[test]
    fn constant_samples() {
        let s = stats_from_samples(vec![2.5; 17]).unwrap();
        assert!(s.percentiles.iter().all(|(_, v)| *v == 2.5));
        assert_eq!(s.mean, 2.5);
    }

    #[test]
    fn cdf_is_monotone_and_ends_at_one() {
        let s = stats_from_samples(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        for w in s.cdf.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 > w[0].1);
        }
        assert_eq!(s.cdf.last().unwrap().1, 1.0);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(stats_from_samples(vec![]), Err(HarnessError::EmptyInput)));
        assert!(matches!(cdf_stats(&[]), Err(HarnessError::EmptyInput)));
    }
}
