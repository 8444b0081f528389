//! Closed-loop state-of-charge estimation.
//!
//! An extended Kalman filter runs over the four filter states of a fitted
//! dynamic cell model. State one is the state of charge itself, so the
//! filter's posterior mean and covariance give the charge estimate and its
//! one-sigma uncertainty directly, with the voltage innovation correcting
//! the drift that pure coulomb counting accumulates from current-sensor
//! bias.
//!
//! Each sample is processed as predict-then-update: the state is advanced
//! through the model recursion with the previous sample's current, then the
//! measured voltage of the current sample folds in through the gain. The
//! covariance update uses the Joseph form, which keeps the matrix positive
//! semidefinite for any gain.

use nalgebra::{Matrix4, Vector4};

use crate::cell::CellParams;
use crate::error::{Error, Result};
use crate::ident::output_state_jacobian;
use crate::models::{filter_state_output, filter_state_step, FilterStateParams, ModelParams};
use crate::plant::SensorConfig;
use crate::trace::Trace;

/// Tuning of the charge estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SocEkfConfig {
    /// Diagonal process-noise variance per state, expressed per hour of
    /// operation; each step adds `q_proc * dt` with `dt` in hours.
    pub q_proc: [f64; 4],
    /// Voltage measurement-noise variance, volts squared.
    pub r_meas: f64,
    /// Initial state: charge followed by the three filter states.
    pub x0: [f64; 4],
    /// Diagonal of the initial state covariance.
    pub p0: [f64; 4],
    /// Abort threshold on the covariance diagonal.
    pub blowup_limit: f64,
}

impl Default for SocEkfConfig {
    /// Nearly drift-free process model, measurement variance matching the
    /// default sensor (Gaussian noise plus quantization), full-charge start
    /// with a loose charge prior.
    fn default() -> Self {
        SocEkfConfig {
            q_proc: [1e-8, 1e-6, 1e-6, 1e-6],
            r_meas: SensorConfig::default().voltage_noise_variance(),
            x0: [1.0, 0.0, 0.0, 0.0],
            p0: [1e-1, 1e-4, 1e-4, 1e-4],
            blowup_limit: 1e6,
        }
    }
}

impl SocEkfConfig {
    /// Same defaults with the measurement variance taken from an explicit
    /// sensor description.
    pub fn for_sensor(sensor: &SensorConfig) -> Self {
        SocEkfConfig {
            r_meas: sensor.voltage_noise_variance(),
            ..SocEkfConfig::default()
        }
    }

    /// Starts the estimator at a given charge, filter states at rest.
    pub fn at_soc(soc0: f64) -> Self {
        SocEkfConfig {
            x0: [soc0, 0.0, 0.0, 0.0],
            ..SocEkfConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (k, q) in self.q_proc.iter().enumerate() {
            if !(q.is_finite() && *q >= 0.0) {
                return Err(Error::InvalidParams(format!(
                    "q_proc[{k}] must be nonnegative, got {q}"
                )));
            }
        }
        for (k, p) in self.p0.iter().enumerate() {
            if !(p.is_finite() && *p >= 0.0) {
                return Err(Error::InvalidParams(format!(
                    "p0[{k}] must be nonnegative, got {p}"
                )));
            }
        }
        if !(self.r_meas.is_finite() && self.r_meas > 0.0) {
            return Err(Error::InvalidParams(format!(
                "r_meas must be positive, got {}",
                self.r_meas
            )));
        }
        if !self.x0.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParams("x0 has a non-finite entry".into()));
        }
        if !(0.0..=1.0).contains(&self.x0[0]) {
            return Err(Error::SocOutOfRange {
                value: self.x0[0],
                op: "soc_ekf",
            });
        }
        if !(self.blowup_limit.is_finite() && self.blowup_limit > 0.0) {
            return Err(Error::InvalidParams(format!(
                "blowup_limit must be positive, got {}",
                self.blowup_limit
            )));
        }
        Ok(())
    }
}

/// One posterior charge estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocEstimate {
    /// Charge estimate, clamped to `[0, 1]`.
    pub soc: f64,
    /// One-sigma charge uncertainty.
    pub sigma: f64,
    /// Voltage residual that produced this update; NaN when the update was
    /// skipped over a non-finite measurement.
    pub innovation_v: f64,
}

/// Running state of the estimator.
#[derive(Debug, Clone)]
pub struct SocEkfState {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
    /// Current applied at the previous sample, driving the next prediction.
    i_prev: Option<f64>,
    /// Samples processed so far, used to attribute errors.
    pub samples_seen: usize,
    /// Updates skipped over non-finite measurements.
    pub skipped_updates: usize,
    /// Times the charge estimate was clamped back into `[0, 1]`.
    pub clamp_events: usize,
}

impl SocEkfState {
    pub fn new(cfg: &SocEkfConfig) -> Self {
        SocEkfState {
            x: Vector4::from_column_slice(&cfg.x0),
            p: Matrix4::from_diagonal(&Vector4::from_column_slice(&cfg.p0)),
            i_prev: None,
            samples_seen: 0,
            skipped_updates: 0,
            clamp_events: 0,
        }
    }
}

fn weights_for<'m>(
    model: &'m ModelParams,
    i: f64,
    op: &'static str,
) -> Result<&'m FilterStateParams> {
    match model {
        ModelParams::FilterState(w) => Ok(w),
        ModelParams::Scheduled(s) => Ok(s.select(i)),
        ModelParams::Combined(_) => Err(Error::FamilyMismatch {
            family: "combined",
            op,
        }),
        ModelParams::Rbf(_) => Err(Error::FamilyMismatch { family: "rbf", op }),
    }
}

/// Advances the estimator by one sample: predicts through the model with
/// the previously applied current, then folds in the measured voltage.
/// Returns the posterior estimate at this sample's instant.
pub fn soc_ekf_step(
    state: &mut SocEkfState,
    i: f64,
    v_measured: f64,
    model: &ModelParams,
    cell: &CellParams,
    cfg: &SocEkfConfig,
) -> Result<SocEstimate> {
    let k = state.samples_seen;
    if !i.is_finite() {
        return Err(Error::Domain {
            index: k,
            reason: format!("non-finite current {i}"),
        });
    }

    if let Some(ip) = state.i_prev {
        let w = weights_for(model, ip, "soc_ekf_step")?;
        let a = crate::models::state_matrix(w);
        let q = Matrix4::from_diagonal(&Vector4::from_column_slice(&cfg.q_proc))
            * cell.sample_period_h;
        state.x = filter_state_step(&state.x, ip, w, cell);
        state.p = a * state.p * a.transpose() + q;
    }

    let w = weights_for(model, i, "soc_ekf_step")?;
    let innovation_v = if v_measured.is_finite() {
        let predicted_v = filter_state_output(&state.x, i, w, cell).map_err(|e| match e {
            Error::Domain { reason, .. } => Error::Domain { index: k, reason },
            other => other,
        })?;
        let e = v_measured - predicted_v;
        let c = output_state_jacobian(&state.x, w);
        let s = (c * state.p * c.transpose())[(0, 0)] + cfg.r_meas;
        let l = state.p * c.transpose() / s;
        state.x += l * e;
        let ilc = Matrix4::identity() - l * c;
        state.p = ilc * state.p * ilc.transpose() + l * l.transpose() * cfg.r_meas;
        state.p = (state.p + state.p.transpose()) * 0.5;
        e
    } else {
        state.skipped_updates += 1;
        f64::NAN
    };

    if state.x[0] < 0.0 || state.x[0] > 1.0 {
        state.x[0] = state.x[0].clamp(0.0, 1.0);
        state.clamp_events += 1;
    }
    if !state.x.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain {
            index: k,
            reason: "estimator state left the finite range".into(),
        });
    }
    let max_diag = (0..4).map(|j| state.p[(j, j)]).fold(0.0f64, f64::max);
    if !max_diag.is_finite() || max_diag > cfg.blowup_limit {
        return Err(Error::CovarianceBlowup {
            index: k,
            max_diag,
            limit: cfg.blowup_limit,
        });
    }

    state.i_prev = Some(i);
    state.samples_seen += 1;
    Ok(SocEstimate {
        soc: state.x[0],
        sigma: state.p[(0, 0)].max(0.0).sqrt(),
        innovation_v,
    })
}

/// A completed estimation run.
#[derive(Debug, Clone)]
pub struct SocEkfRun {
    pub estimates: Vec<SocEstimate>,
    pub skipped_updates: usize,
    pub clamp_events: usize,
}

/// Folds the estimator over a measured record.
pub fn soc_ekf_run(
    trace: &Trace,
    model: &ModelParams,
    cell: &CellParams,
    cfg: &SocEkfConfig,
) -> Result<SocEkfRun> {
    cell.validate()?;
    model.validate()?;
    cfg.validate()?;
    trace.check_period(cell.sample_period_h)?;
    weights_for(model, 0.0, "soc_ekf_run")?;
    let mut state = SocEkfState::new(cfg);
    let mut estimates = Vec::with_capacity(trace.len());
    for s in trace.samples() {
        estimates.push(soc_ekf_step(
            &mut state, s.current_a, s.voltage_v, model, cell, cfg,
        )?);
    }
    Ok(SocEkfRun {
        estimates,
        skipped_updates: state.skipped_updates,
        clamp_events: state.clamp_events,
    })
}

/// Accuracy and calibration of a run against a known charge trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocSummary {
    pub rms_soc_error: f64,
    pub max_abs_soc_error: f64,
    pub final_soc_error: f64,
    /// Fraction of samples with `|error| <= 3 * sigma`.
    pub coverage_3sigma: f64,
}

/// Scores a run against a reference charge series of the same length.
pub fn soc_summary(estimates: &[SocEstimate], reference: &[f64]) -> Result<SocSummary> {
    if estimates.len() != reference.len() || estimates.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimates against {} reference samples",
            estimates.len(),
            reference.len()
        )));
    }
    let mut sq = 0.0;
    let mut max_abs = 0.0f64;
    let mut covered = 0usize;
    for (e, r) in estimates.iter().zip(reference) {
        let err = e.soc - r;
        sq += err * err;
        max_abs = max_abs.max(err.abs());
        if err.abs() <= 3.0 * e.sigma {
            covered += 1;
        }
    }
    Ok(SocSummary {
        rms_soc_error: (sq / estimates.len() as f64).sqrt(),
        max_abs_soc_error: max_abs,
        final_soc_error: estimates.last().unwrap().soc - reference.last().unwrap(),
        coverage_3sigma: covered as f64 / estimates.len() as f64,
    })
}
