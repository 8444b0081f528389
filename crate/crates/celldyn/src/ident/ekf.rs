//! Output-weight identification of the filter-state model by extended
//! Kalman filtering.
//!
//! The twelve weights enter the model both through the output map and
//! through the state recursion, so the measurement jacobian is a total
//! derivative: a 4 x 12 state-sensitivity matrix is propagated alongside
//! the state and folded into the output gradient at every sample. The
//! filter runs without process noise, which makes the weight covariance
//! monotonically decreasing; several passes over the same record are used
//! instead of noise injection to deepen convergence.

use nalgebra::{RowSVector, SMatrix, SVector, Vector4};

use crate::cell::{peukert_current, CellParams};
use crate::error::{Error, Result};
use crate::models::{
    filter_state_output, filter_state_step, state_matrix, FilterStateParams,
};
use crate::trace::Trace;

pub type WeightVector = SVector<f64, 12>;
pub type WeightCovariance = SMatrix<f64, 12, 12>;
pub type StateSensitivity = SMatrix<f64, 4, 12>;

/// Tuning of the weight filter.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightEkfConfig {
    /// Number of passes over the record. Weights and covariance carry
    /// across passes; the model state and its sensitivity restart.
    pub passes: usize,
    /// Scalar measurement-noise variance.
    pub meas_noise_r: f64,
    /// Initial covariance diagonal, one entry per weight. The spread of
    /// plausible magnitudes across the weights is enormous (a series
    /// resistance acting on a rate-corrected current versus a unit-interval
    /// filter pole), so the prior must be sized per weight for all of them
    /// to move.
    pub p0_diag: [f64; 12],
    /// Covariance diagonal bound beyond which the run is aborted.
    pub blowup_limit: f64,
}

impl Default for WeightEkfConfig {
    fn default() -> Self {
        WeightEkfConfig {
            passes: 3,
            meas_noise_r: 0.5,
            p0_diag: [
                1e-2, 1e-2, 1e-2, 1e-2, 1e-2, // state recursion weights
                1e0,  // voltage offset
                1e5,  // series resistance on the rate-corrected current
                1e0,  // low-soc knee numerator
                1e-1, // knee offset
                1e0,  // linear ocv slope
                1e2, 1e2, // relaxation output weights
            ],
            blowup_limit: 1e6,
        }
    }
}

impl WeightEkfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.passes == 0 {
            return Err(Error::InvalidParams("passes must be at least 1".into()));
        }
        if !(self.meas_noise_r.is_finite() && self.meas_noise_r > 0.0) {
            return Err(Error::InvalidParams(format!(
                "meas_noise_r must be positive, got {}",
                self.meas_noise_r
            )));
        }
        if self
            .p0_diag
            .iter()
            .any(|p| !(p.is_finite() && *p > 0.0))
        {
            return Err(Error::InvalidParams(
                "p0_diag entries must be positive".into(),
            ));
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

/// Partial derivative of the output with respect to the weights, state held
/// fixed.
pub fn output_weight_jacobian(
    x: &Vector4<f64>,
    i_mod: f64,
    w: &FilterStateParams,
) -> WeightVector {
    let den = x[0] + w.w[8];
    let mut j = WeightVector::zeros();
    j[5] = 1.0;
    j[6] = i_mod;
    j[7] = 1.0 / den;
    j[8] = -w.w[7] / (den * den);
    j[9] = x[0];
    j[10] = x[2];
    j[11] = x[3];
    j
}

/// Partial derivative of the output with respect to the state.
pub fn output_state_jacobian(x: &Vector4<f64>, w: &FilterStateParams) -> RowSVector<f64, 4> {
    let den = x[0] + w.w[8];
    RowSVector::<f64, 4>::from_row_slice(&[
        w.w[9] - w.w[7] / (den * den),
        w.fixed_output_gain,
        w.w[10],
        w.w[11],
    ])
}

/// Partial derivative of the state update with respect to the weights,
/// state held fixed. Independent of the weights themselves.
pub fn step_weight_jacobian(x: &Vector4<f64>) -> StateSensitivity {
    let mut j = StateSensitivity::zeros();
    j[(1, 0)] = x[0];
    j[(1, 1)] = x[1];
    j[(1, 2)] = 1.0;
    j[(2, 3)] = x[2];
    j[(2, 4)] = x[3];
    j[(3, 3)] = x[3];
    j[(3, 4)] = -x[2];
    j
}

/// Scalar-measurement Kalman gain: returns the gain column and the
/// innovation variance it divides by.
pub fn kalman_gain(
    p: &WeightCovariance,
    c: &RowSVector<f64, 12>,
    r: f64,
) -> (WeightVector, f64) {
    let pct = p * c.transpose();
    let s = (c * pct)[(0, 0)] + r;
    (pct / s, s)
}

/// Running state of the weight filter over one record.
#[derive(Debug, Clone)]
pub struct WeightEkfState {
    pub w: FilterStateParams,
    pub p: WeightCovariance,
    pub x: Vector4<f64>,
    pub dxdw: StateSensitivity,
}

impl WeightEkfState {
    /// Fresh filter around an initial guess: model state starts from rest
    /// at the known soc, sensitivity starts at zero.
    pub fn new(init: &FilterStateParams, soc0: f64, p0_diag: &[f64; 12]) -> Self {
        WeightEkfState {
            w: init.clone(),
            p: WeightCovariance::from_diagonal(&WeightVector::from_row_slice(p0_diag)),
            x: Vector4::new(soc0, 0.0, 0.0, 0.0),
            dxdw: StateSensitivity::zeros(),
        }
    }

    /// Restarts the model state and its sensitivity for another pass over
    /// the record, keeping weights and covariance.
    pub fn reset_trajectory(&mut self, soc0: f64) {
        self.x = Vector4::new(soc0, 0.0, 0.0, 0.0);
        self.dxdw = StateSensitivity::zeros();
    }
}

/// One measurement update and state propagation. Returns the innovation.
pub fn weight_ekf_step(
    state: &mut WeightEkfState,
    i: f64,
    measured_v: f64,
    r: f64,
    cell: &CellParams,
) -> Result<f64> {
    let i_mod = peukert_current(i, cell);
    let y = filter_state_output(&state.x, i, &state.w, cell)?;
    let c = output_weight_jacobian(&state.x, i_mod, &state.w).transpose()
        + output_state_jacobian(&state.x, &state.w) * state.dxdw;
    let e = measured_v - y;
    if !e.is_finite() {
        return Err(Error::Domain {
            index: 0,
            reason: format!("non-finite innovation from measurement {measured_v}"),
        });
    }
    let (l, _s) = kalman_gain(&state.p, &c, r);
    for (wj, lj) in state.w.w.iter_mut().zip(l.iter()) {
        *wj += lj * e;
    }
    state.p -= l * (c * state.p);
    state.p = (state.p + state.p.transpose()) * 0.5;
    // Propagate state and sensitivity under the updated weights.
    state.dxdw = step_weight_jacobian(&state.x) + state_matrix(&state.w) * state.dxdw;
    state.x = filter_state_step(&state.x, i, &state.w, cell);
    Ok(e)
}

/// Frozen-weight forward pass: the model output and its total derivative
/// with respect to the weights at every sample, no measurement updates.
pub fn output_sensitivities(
    currents: &[f64],
    cell: &CellParams,
    w: &FilterStateParams,
    soc0: f64,
) -> Result<Vec<(f64, WeightVector)>> {
    cell.validate()?;
    w.validate()?;
    let mut x = Vector4::new(soc0, 0.0, 0.0, 0.0);
    let mut dxdw = StateSensitivity::zeros();
    let mut out = Vec::with_capacity(currents.len());
    for (k, &i) in currents.iter().enumerate() {
        let i_mod = peukert_current(i, cell);
        let y = filter_state_output(&x, i, w, cell).map_err(|e| match e {
            Error::Domain { reason, .. } => Error::Domain { index: k, reason },
            other => other,
        })?;
        let c = output_weight_jacobian(&x, i_mod, w)
            + (output_state_jacobian(&x, w) * dxdw).transpose();
        out.push((y, c));
        dxdw = step_weight_jacobian(&x) + state_matrix(w) * dxdw;
        x = filter_state_step(&x, i, w, cell);
    }
    Ok(out)
}

/// Result of a weight-identification run.
#[derive(Debug, Clone)]
pub struct WeightEkfFit {
    pub params: FilterStateParams,
    pub covariance: WeightCovariance,
    /// Root-mean-square innovation of the final pass, volts.
    pub innovation_rms_v: f64,
    /// Innovation rms of every pass, in order.
    pub pass_rms_v: Vec<f64>,
}

/// Identifies the twelve output weights from a measured record.
///
/// `soc0` is the known state of charge at the start of the record; every
/// pass restarts the model trajectory from rest there.
pub fn ekf_identify(
    trace: &Trace,
    cell: &CellParams,
    soc0: f64,
    init: &FilterStateParams,
    cfg: &WeightEkfConfig,
) -> Result<WeightEkfFit> {
    cell.validate()?;
    trace.check_period(cell.sample_period_h)?;
    cfg.validate()?;
    init.validate()?;
    if !(0.0..=1.0).contains(&soc0) {
        return Err(Error::SocOutOfRange {
            value: soc0,
            op: "ekf_identify",
        });
    }
    let mut state = WeightEkfState::new(init, soc0, &cfg.p0_diag);
    let mut pass_rms_v = Vec::with_capacity(cfg.passes);
    for _ in 0..cfg.passes {
        state.reset_trajectory(soc0);
        let mut sq_sum = 0.0;
        for (k, s) in trace.samples().iter().enumerate() {
            let e = weight_ekf_step(&mut state, s.current_a, s.voltage_v, cfg.meas_noise_r, cell)
                .map_err(|err| match err {
                    Error::Domain { reason, .. } => Error::Domain { index: k, reason },
                    other => other,
                })?;
            sq_sum += e * e;
            let max_diag = state.p.diagonal().iter().cloned().fold(0.0f64, f64::max);
            if !max_diag.is_finite() || max_diag > cfg.blowup_limit {
                return Err(Error::CovarianceBlowup {
                    index: k,
                    max_diag,
                    limit: cfg.blowup_limit,
                });
            }
        }
        pass_rms_v.push((sq_sum / trace.samples().len() as f64).sqrt());
    }
    let innovation_rms_v = *pass_rms_v.last().expect("at least one pass");
    Ok(WeightEkfFit {
        params: state.w,
        covariance: state.p,
        innovation_rms_v,
        pass_rms_v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{simulate, ModelParams, SimInit};
    use crate::plant::{
        apply_sensor, gen_pulse_profile, plant_simulate, truth_relaxing, ProfileSpec, SensorConfig,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_stable_weights(rng: &mut impl Rng) -> FilterStateParams {
        let rho: f64 = rng.gen_range(0.3..0.98);
        let ang: f64 = rng.gen_range(0.0..0.5);
        FilterStateParams::from_weights([
            rng.gen_range(-0.1..0.1),
            rng.gen_range(-0.9..0.9),
            rng.gen_range(-0.01..0.01),
            rho * ang.cos(),
            rho * ang.sin(),
            rng.gen_range(3.0..4.0),
            rng.gen_range(-20.0..80.0),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(0.1..1.0),
            rng.gen_range(-0.5..1.5),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        ])
    }

    fn random_currents(rng: &mut impl Rng, n: usize, amp: f64) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-amp..amp)).collect()
    }

    #[test]
    fn sensitivities_match_central_differences() {
        let cell = CellParams::default();
        let mut rng = ChaCha12Rng::seed_from_u64(2024);
        for _ in 0..25 {
            let w = random_stable_weights(&mut rng);
            let currents = random_currents(&mut rng, 40, 8.0);
            let sens = output_sensitivities(&currents, &cell, &w, 0.6).unwrap();
            for j in 0..12 {
                let h = 1e-6 * w.w[j].abs().max(1.0);
                let mut wp = w.clone();
                wp.w[j] += h;
                let mut wm = w.clone();
                wm.w[j] -= h;
                let yp = output_sensitivities(&currents, &cell, &wp, 0.6).unwrap();
                let ym = output_sensitivities(&currents, &cell, &wm, 0.6).unwrap();
                for k in [0, 10, 25, 39] {
                    let fd = (yp[k].0 - ym[k].0) / (2.0 * h);
                    let an = sens[k].1[j];
                    assert!(
                        (fd - an).abs() <= 1e-4 * an.abs().max(1.0),
                        "weight {j} sample {k}: analytic {an}, differenced {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn gain_satisfies_its_defining_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a = WeightCovariance::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let p = &a * a.transpose(); // symmetric psd
            let c = RowSVector::<f64, 12>::from_fn(|_, _| rng.gen_range(-2.0..2.0));
            let r = rng.gen_range(1e-6..1.0);
            let (l, s) = kalman_gain(&p, &c, r);
            let lhs = l * s;
            let rhs = p * c.transpose();
            assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn covariance_decreases_and_stays_symmetric_psd() {
        let cell = CellParams::default();
        let truth = truth_relaxing();
        let currents = gen_pulse_profile(&ProfileSpec::pulses(1.0), &cell).unwrap();
        let run = plant_simulate(&cell, &ModelParams::FilterState(truth.clone()), 0.95, &currents)
            .unwrap();
        let cfg = WeightEkfConfig::default();
        let mut state = WeightEkfState::new(&truth, 0.95, &cfg.p0_diag);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let probes: Vec<WeightVector> =
            (0..5).map(|_| WeightVector::from_fn(|_, _| rng.gen_range(-1.0..1.0))).collect();
        let mut quad: Vec<f64> = probes.iter().map(|z| (z.transpose() * state.p * z)[0]).collect();
        for s in run.trace.samples().iter().take(600) {
            weight_ekf_step(&mut state, s.current_a, s.voltage_v, cfg.meas_noise_r, &cell)
                .unwrap();
            assert!((state.p - state.p.transpose()).norm() <= 1e-12 * state.p.norm());
            for (q, z) in quad.iter_mut().zip(&probes) {
                let now = (z.transpose() * state.p * z)[0];
                assert!(now <= *q + 1e-9 * q.abs().max(1.0), "quadratic form grew");
                *q = now;
            }
        }
        let eigs = state.p.symmetric_eigenvalues();
        let trace_p = state.p.trace();
        assert!(eigs.iter().all(|e| *e >= -1e-10 * trace_p.abs()));
    }

    #[test]
    fn recovers_prediction_from_perturbed_start() {
        let cell = CellParams::default();
        let truth = truth_relaxing();
        let currents = gen_pulse_profile(&ProfileSpec::pulses(1.0), &cell).unwrap();
        let run = plant_simulate(&cell, &ModelParams::FilterState(truth.clone()), 0.95, &currents)
            .unwrap();
        let mut init = truth.clone();
        init.w[6] *= 0.4; // badly wrong series resistance
        init.w[7] = -0.1;
        init.w[9] = 0.6;
        init.w[10] = 0.0; // relaxation weights unknown
        init.w[11] = 0.0;
        let fit = ekf_identify(&run.trace, &cell, 0.95, &init, &WeightEkfConfig::default())
            .unwrap();
        assert!(
            fit.innovation_rms_v < 1e-3,
            "final innovation rms {}",
            fit.innovation_rms_v
        );
        assert!(fit.pass_rms_v.last().unwrap() <= fit.pass_rms_v.first().unwrap());
        // Held-out record at a different rate.
        let held = gen_pulse_profile(&ProfileSpec::pulses(2.0), &cell).unwrap();
        let truth_run =
            plant_simulate(&cell, &ModelParams::FilterState(truth), 0.9, &held).unwrap();
        let predicted = simulate(
            &ModelParams::FilterState(fit.params),
            &truth_run.trace,
            &cell,
            &SimInit::at_soc(0.9),
        )
        .unwrap();
        let rms = (predicted
            .iter()
            .zip(truth_run.trace.voltages())
            .map(|(p, m)| (p - m) * (p - m))
            .sum::<f64>()
            / predicted.len() as f64)
            .sqrt();
        assert!(rms < 2e-3, "held-out rms {rms}");
    }

    #[test]
    fn noisy_measurements_still_converge() {
        let cell = CellParams::default();
        let truth = truth_relaxing();
        let currents = gen_pulse_profile(&ProfileSpec::pulses(1.0), &cell).unwrap();
        let run = plant_simulate(&cell, &ModelParams::FilterState(truth.clone()), 0.95, &currents)
            .unwrap();
        let noisy = apply_sensor(&run.trace, &SensorConfig::default(), 99).unwrap();
        let mut init = truth.clone();
        init.w[6] *= 0.5;
        init.w[10] = 0.0;
        init.w[11] = 0.0;
        let fit =
            ekf_identify(&noisy, &cell, 0.95, &init, &WeightEkfConfig::default()).unwrap();
        // The innovation can never beat the sensor, but it should approach it.
        assert!(
            fit.innovation_rms_v < 3e-3,
            "final innovation rms {}",
            fit.innovation_rms_v
        );
    }

    #[test]
    fn non_finite_measurement_is_rejected_by_the_step() {
        let cell = CellParams::default();
        let truth = truth_relaxing();
        let cfg = WeightEkfConfig::default();
        let mut state = WeightEkfState::new(&truth, 0.9, &cfg.p0_diag);
        let err =
            weight_ekf_step(&mut state, 8.0, f64::NAN, cfg.meas_noise_r, &cell).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
    }

    #[test]
    fn covariance_guard_aborts_with_the_offending_index() {
        let cell = CellParams::default();
        let truth = truth_relaxing();
        let currents = vec![8.0; 50];
        let run =
            plant_simulate(&cell, &ModelParams::FilterState(truth.clone()), 0.9, &currents)
                .unwrap();
        let cfg = WeightEkfConfig {
            blowup_limit: 1e-8, // far below the prior, trips immediately
            ..WeightEkfConfig::default()
        };
        let err = ekf_identify(&run.trace, &cell, 0.9, &truth, &cfg).unwrap_err();
        match err {
            Error::CovarianceBlowup { index, max_diag, limit } => {
                assert_eq!(index, 0);
                assert!(max_diag > limit);
            }
            other => panic!("expected a covariance abort, got {other:?}"),
        }
    }

    #[test]
    fn config_rejects_degenerate_tuning() {
        let mut cfg = WeightEkfConfig::default();
        cfg.passes = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = WeightEkfConfig::default();
        cfg.meas_noise_r = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = WeightEkfConfig::default();
        cfg.p0_diag[6] = -1.0;
        assert!(cfg.validate().is_err());
    }
}
