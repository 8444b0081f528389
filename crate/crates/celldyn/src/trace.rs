//! Measured (or synthesized) current/voltage logs.
//!
//! A [`Trace`] is a non-empty, uniformly sampled sequence of
//! time/current/voltage rows. Uniformity is enforced at construction to one
//! part in a million of the sampling period; irregular logs can be brought
//! onto a uniform grid first with [`Trace::resampled`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on timestamp spacing.
pub const UNIFORMITY_REL_TOL: f64 = 1e-6;

/// One log row. Temperature is carried when present but no operation in this
/// crate consumes it yet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time_s: f64,
    pub current_a: f64,
    pub voltage_v: f64,
    pub temp_c: Option<f64>,
}

/// Uniformly sampled measurement log plus free-form metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    samples: Vec<Sample>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

impl Trace {
    /// Builds a trace, rejecting empty input and non-uniform spacing.
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let trace = Trace {
            samples,
            meta: BTreeMap::new(),
        };
        trace.check()?;
        Ok(trace)
    }

    fn check(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::EmptyTrace);
        }
        for s in &self.samples {
            for (what, v) in [
                ("time", s.time_s),
                ("current", s.current_a),
                ("voltage", s.voltage_v),
            ] {
                if !v.is_finite() {
                    return Err(Error::InvalidParams(format!(
                        "non-finite {what} at t = {}",
                        s.time_s
                    )));
                }
            }
        }
        if let Some(dt) = self.sample_period_s() {
            if dt <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "non-increasing timestamps, first step {dt} s"
                )));
            }
            for (k, pair) in self.samples.windows(2).enumerate() {
                let step = pair[1].time_s - pair[0].time_s;
                if (step - dt).abs() > UNIFORMITY_REL_TOL * dt {
                    return Err(Error::NonUniformSampling {
                        index: k + 1,
                        actual_s: step,
                        expected_s: dt,
                    });
                }
            }
        }
        Ok(())
    }

    /// Resamples arbitrary (strictly increasing in time, non-empty) rows onto
    /// a uniform grid by linear interpolation. The grid period is the median
    /// of the observed steps.
    pub fn resampled(samples: &[Sample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if samples.len() == 1 {
            return Trace::new(samples.to_vec());
        }
        let mut steps: Vec<f64> = samples.windows(2).map(|p| p[1].time_s - p[0].time_s).collect();
        if steps.iter().any(|&d| d <= 0.0) {
            return Err(Error::InvalidParams(
                "timestamps must be strictly increasing to resample".into(),
            ));
        }
        steps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let dt = steps[steps.len() / 2];
        let t0 = samples[0].time_s;
        let t_end = samples[samples.len() - 1].time_s;
        let n = ((t_end - t0) / dt).floor() as usize + 1;
        let mut out = Vec::with_capacity(n);
        let mut j = 0usize;
        for k in 0..n {
            let t = t0 + k as f64 * dt;
            while j + 2 < samples.len() && samples[j + 1].time_s < t {
                j += 1;
            }
            let (a, b) = (&samples[j], &samples[j + 1]);
            let span = b.time_s - a.time_s;
            let w = ((t - a.time_s) / span).clamp(0.0, 1.0);
            let temp = match (a.temp_c, b.temp_c) {
                (Some(x), Some(y)) => Some(x + w * (y - x)),
                _ => None,
            };
            out.push(Sample {
                time_s: t,
                current_a: a.current_a + w * (b.current_a - a.current_a),
                voltage_v: a.voltage_v + w * (b.voltage_v - a.voltage_v),
                temp_c: temp,
            });
        }
        Trace::new(out)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Observed sampling period, `None` for a single-sample trace.
    pub fn sample_period_s(&self) -> Option<f64> {
        if self.samples.len() < 2 {
            return None;
        }
        Some(self.samples[1].time_s - self.samples[0].time_s)
    }

    /// Checks the observed period against the configured cell period.
    pub fn check_period(&self, cell_period_h: f64) -> Result<()> {
        if let Some(dt) = self.sample_period_s() {
            let expected = cell_period_h * 3600.0;
            if (dt - expected).abs() > UNIFORMITY_REL_TOL * expected {
                return Err(Error::SamplePeriodMismatch {
                    trace_s: dt,
                    cell_s: expected,
                });
            }
        }
        Ok(())
    }

    pub fn currents(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.current_a)
    }

    pub fn voltages(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.voltage_v)
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.meta
    }

    /// Returns the sub-trace `[start, end)` with timestamps preserved.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.samples.len() {
            return Err(Error::DimensionMismatch(format!(
                "slice {start}..{end} of {} samples",
                self.samples.len()
            )));
        }
        Trace::new(self.samples[start..end].to_vec())
    }
}
