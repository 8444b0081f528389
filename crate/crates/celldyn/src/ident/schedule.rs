//! Gain-scheduled identification: one weight filter per current-magnitude
//! bin.
//!
//! The record is cut into maximal runs of samples falling in the same bin.
//! Each bin owns an independent weight filter whose weights and covariance
//! persist across that bin's runs and passes; at the start of every run the
//! model trajectory restarts from rest at the coulomb-counted soc, which
//! deliberately ignores any relaxation still in flight at the cut. Bins that
//! the record never visits are an error, not a silently untrained entry.

use crate::cell::{soc_step, CellParams, Soc};
use crate::error::{Error, Result};
use crate::ident::ekf::{weight_ekf_step, WeightEkfConfig, WeightEkfState};
use crate::models::{FilterStateParams, ScheduledParams};
use crate::trace::Trace;

/// Tuning of the scheduled fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleFitConfig {
    /// Ascending exclusive upper bounds of the magnitude bins, amps; the
    /// last must be infinite.
    pub edges: Vec<f64>,
    /// Weight-filter tuning shared by every bin.
    pub ekf: WeightEkfConfig,
}

impl ScheduleFitConfig {
    pub fn for_cell(cell: &CellParams) -> Self {
        ScheduleFitConfig {
            edges: ScheduledParams::default_edges(cell),
            ekf: WeightEkfConfig::default(),
        }
    }
}

/// Result of a scheduled identification.
#[derive(Debug, Clone)]
pub struct ScheduleFit {
    pub params: ScheduledParams,
    /// Final-pass innovation rms per bin, volts.
    pub bin_innovation_rms_v: Vec<f64>,
    /// Samples landing in each bin.
    pub bin_sample_counts: Vec<usize>,
}

fn bin_of(i: f64, edges: &[f64]) -> usize {
    let mag = i.abs();
    edges
        .iter()
        .position(|&hi| mag < hi)
        .unwrap_or(edges.len() - 1)
}

/// Identifies one filter-state parameter set per current-magnitude bin.
///
/// Every bin starts from the same initial guess. `soc0` anchors the
/// coulomb count that supplies each run's starting state of charge.
pub fn fit_scheduled(
    trace: &Trace,
    cell: &CellParams,
    soc0: f64,
    init: &FilterStateParams,
    cfg: &ScheduleFitConfig,
) -> Result<ScheduleFit> {
    cell.validate()?;
    trace.check_period(cell.sample_period_h)?;
    cfg.ekf.validate()?;
    init.validate()?;
    if !(0.0..=1.0).contains(&soc0) {
        return Err(Error::SocOutOfRange {
            value: soc0,
            op: "fit_scheduled",
        });
    }
    if cfg.edges.is_empty() || !cfg.edges.last().unwrap().is_infinite() {
        return Err(Error::InvalidParams(
            "bin edges must end with an infinite bound".into(),
        ));
    }
    let samples = trace.samples();
    let mut soc_series = Vec::with_capacity(samples.len());
    let mut s = Soc(soc0);
    for sample in samples {
        soc_series.push(s.0);
        s = soc_step(s, sample.current_a, cell).soc;
    }

    // Maximal same-bin runs as (bin, start, end-exclusive).
    let mut runs: Vec<(usize, usize, usize)> = Vec::new();
    let mut start = 0;
    let mut current_bin = bin_of(samples[0].current_a, &cfg.edges);
    for (k, sample) in samples.iter().enumerate().skip(1) {
        let b = bin_of(sample.current_a, &cfg.edges);
        if b != current_bin {
            runs.push((current_bin, start, k));
            start = k;
            current_bin = b;
        }
    }
    runs.push((current_bin, start, samples.len()));

    let n_bins = cfg.edges.len();
    let mut counts = vec![0usize; n_bins];
    for &(b, s0, s1) in &runs {
        counts[b] += s1 - s0;
    }
    let mut lo = 0.0;
    for (b, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::EmptyBin {
                bin: b,
                lo_a: lo,
                hi_a: cfg.edges[b],
            });
        }
        lo = cfg.edges[b];
    }

    let mut fitted = Vec::with_capacity(n_bins);
    let mut bin_rms = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let mut state = WeightEkfState::new(init, soc0, &cfg.ekf.p0_diag);
        let mut final_sq = 0.0;
        for pass in 0..cfg.ekf.passes {
            final_sq = 0.0;
            for &(run_bin, s0, s1) in &runs {
                if run_bin != b {
                    continue;
                }
                state.reset_trajectory(soc_series[s0]);
                for k in s0..s1 {
                    let e = weight_ekf_step(
                        &mut state,
                        samples[k].current_a,
                        samples[k].voltage_v,
                        cfg.ekf.meas_noise_r,
                        cell,
                    )
                    .map_err(|err| match err {
                        Error::Domain { reason, .. } => Error::Domain { index: k, reason },
                        other => other,
                    })?;
                    if pass == cfg.ekf.passes - 1 {
                        final_sq += e * e;
                    }
                    let max_diag =
                        state.p.diagonal().iter().cloned().fold(0.0f64, f64::max);
                    if !max_diag.is_finite() || max_diag > cfg.ekf.blowup_limit {
                        return Err(Error::CovarianceBlowup {
                            index: k,
                            max_diag,
                            limit: cfg.ekf.blowup_limit,
                        });
                    }
                }
            }
        }
        bin_rms.push((final_sq / counts[b] as f64).sqrt());
        fitted.push(state.w);
    }
    Ok(ScheduleFit {
        params: ScheduledParams::new(cfg.edges.clone(), fitted)?,
        bin_innovation_rms_v: bin_rms,
        bin_sample_counts: counts,
    })
}
