//! Scoring of predicted voltage series against a reference record.

use serde::{Deserialize, Serialize};

use crate::cell::CellParams;
use crate::error::{Error, Result};
use crate::models::ScheduledParams;
use crate::trace::Trace;

/// Root-mean-square of a residual series, in the residual's own unit.
pub fn rms(residuals: &[f64]) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
}

/// Voltage error statistics over one subset of the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRms {
    pub label: String,
    /// Current-magnitude range covered, amps.
    pub lo_a: f64,
    pub hi_a: f64,
    pub samples: usize,
    pub rms_mv: f64,
}

/// Full accuracy report for one model against one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub family: String,
    /// Hex digest of the parameter file the predictions came from.
    pub param_sha256: String,
    pub samples: usize,
    pub rms_mv: f64,
    pub max_abs_mv: f64,
    /// Error split by current level: rest, then the rate bins the scheduled
    /// family uses.
    pub segments: Vec<SegmentRms>,
}

/// Groups residuals by applied current level and scores each group. Rest
/// samples (zero current) form their own segment; the remainder follow the
/// default rate bins.
pub fn segment_rms(trace: &Trace, residuals_v: &[f64], cell: &CellParams) -> Vec<SegmentRms> {
    let edges = ScheduledParams::default_edges(cell);
    let mut bounds = vec![(0.0, 0.0)];
    let mut lo = 0.0;
    for &hi in &edges {
        bounds.push((lo, hi));
        lo = hi;
    }
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); bounds.len()];
    for (s, &r) in trace.samples().iter().zip(residuals_v) {
        let mag = s.current_a.abs();
        let slot = if mag == 0.0 {
            0
        } else {
            1 + edges.iter().position(|&hi| mag < hi).unwrap_or(edges.len() - 1)
        };
        buckets[slot].push(r);
    }
    bounds
        .iter()
        .zip(&buckets)
        .map(|(&(lo_a, hi_a), bucket)| SegmentRms {
            label: if hi_a == 0.0 {
                "rest".to_string()
            } else if hi_a.is_infinite() {
                format!("|i| >= {lo_a} A")
            } else {
                format!("{lo_a} A <= |i| < {hi_a} A")
            },
            lo_a,
            hi_a,
            samples: bucket.len(),
            rms_mv: rms(bucket) * 1e3,
        })
        .collect()
}

/// Builds the report for a predicted series against the record's measured
/// voltages.
pub fn metrics_report(
    trace: &Trace,
    predicted_v: &[f64],
    cell: &CellParams,
    family: &str,
    param_sha256: &str,
) -> Result<MetricsReport> {
    if predicted_v.len() != trace.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions against {} samples",
            predicted_v.len(),
            trace.len()
        )));
    }
    let residuals: Vec<f64> = trace
        .voltages()
        .zip(predicted_v)
        .map(|(m, p)| m - p)
        .collect();
    let max_abs = residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    Ok(MetricsReport {
        family: family.to_string(),
        param_sha256: param_sha256.to_string(),
        samples: trace.len(),
        rms_mv: rms(&residuals) * 1e3,
        max_abs_mv: max_abs * 1e3,
        segments: segment_rms(trace, &residuals, cell),
    })
}
