//! Closed-form identification of the combined static model.
//!
//! The model is linear in its coefficients once the soc-dependent basis
//! functions and the sign-split current columns are laid out, so a single
//! orthogonal least-squares solve recovers every parameter. Rank problems
//! are reported by column name instead of leaving the caller to guess which
//! excitation was missing from the data.

use nalgebra::{DMatrix, DVector};

use crate::cell::{soc_step, CellParams, Soc};
use crate::error::{Error, Result};
use crate::models::{CombinedParams, SOC_EVAL_HI, SOC_EVAL_LO};
use crate::trace::Trace;

/// Names of the regressor columns, in order.
pub const REGRESSOR_COLUMNS: [&str; 7] = [
    "offset",
    "discharge_current",
    "charge_current",
    "reciprocal_soc",
    "soc",
    "log_soc",
    "log_one_minus_soc",
];

/// Relative singular-value threshold below which a direction is treated as
/// unexcited.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Regression problem for the combined model: one row per usable sample.
#[derive(Debug, Clone)]
pub struct Regressor {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Trace indices the rows came from.
    pub rows: Vec<usize>,
    /// Samples dropped because their soc sat outside the open evaluation
    /// band, where the reciprocal and logarithmic columns are unusable.
    pub excluded: usize,
}

/// Builds the regression problem from a trace and its per-sample soc.
///
/// `soc[k]` must be the state of charge the voltage of sample `k` was
/// produced at, before that sample's current acts.
pub fn build_regressor(trace: &Trace, soc: &[Soc]) -> Result<Regressor> {
    let samples = trace.samples();
    if soc.len() != samples.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} soc values for {} samples",
            soc.len(),
            samples.len()
        )));
    }
    let mut rows = Vec::new();
    for (k, s) in soc.iter().enumerate() {
        if s.0 > SOC_EVAL_LO && s.0 < SOC_EVAL_HI {
            rows.push(k);
        }
    }
    let excluded = samples.len() - rows.len();
    if rows.is_empty() {
        return Err(Error::EmptyRegressor {
            total: samples.len(),
            excluded,
        });
    }
    let mut x = DMatrix::zeros(rows.len(), REGRESSOR_COLUMNS.len());
    let mut y = DVector::zeros(rows.len());
    for (r, &k) in rows.iter().enumerate() {
        let i = samples[k].current_a;
        let s = soc[k].0;
        x[(r, 0)] = 1.0;
        x[(r, 1)] = i.max(0.0);
        x[(r, 2)] = i.min(0.0);
        x[(r, 3)] = 1.0 / s;
        x[(r, 4)] = s;
        x[(r, 5)] = s.ln();
        x[(r, 6)] = (1.0 - s).ln();
        y[r] = samples[k].voltage_v;
    }
    Ok(Regressor {
        x,
        y,
        rows,
        excluded,
    })
}

/// Result of a combined-model least-squares fit.
#[derive(Debug, Clone)]
pub struct CombinedFit {
    pub params: CombinedParams,
    /// Raw solution in column order, before the sign mapping onto the model.
    pub theta: [f64; 7],
    /// Root-mean-square voltage residual over the rows used, volts.
    pub residual_rms_v: f64,
    /// Ratio of largest to smallest singular value of the regressor.
    pub condition: f64,
    pub rows_used: usize,
    pub rows_excluded: usize,
}

/// Fits the combined model to a trace by orthogonal least squares.
///
/// The per-sample soc is reconstructed by coulomb counting from `soc0` using
/// the measured currents, aligned so each sample's voltage is paired with
/// the soc before that sample's current acts. Rank deficiency is an error
/// naming the columns the data failed to excite.
pub fn fit_combined(trace: &Trace, cell: &CellParams, soc0: f64) -> Result<CombinedFit> {
    cell.validate()?;
    trace.check_period(cell.sample_period_h)?;
    if !(0.0..=1.0).contains(&soc0) {
        return Err(Error::SocOutOfRange {
            value: soc0,
            op: "fit_combined",
        });
    }
    let mut soc = Vec::with_capacity(trace.samples().len());
    let mut s = Soc(soc0);
    for sample in trace.samples() {
        soc.push(s);
        s = soc_step(s, sample.current_a, cell).soc;
    }
    let reg = build_regressor(trace, &soc)?;
    solve_regressor(&reg)
}

/// Solves an already-built regression problem.
pub fn solve_regressor(reg: &Regressor) -> Result<CombinedFit> {
    let n_cols = REGRESSOR_COLUMNS.len();
    let svd = reg.x.clone().svd(true, true);
    let smax = svd
        .singular_values
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    if smax == 0.0 {
        return Err(Error::RankDeficient {
            rank: 0,
            cols: n_cols,
            columns: REGRESSOR_COLUMNS.to_vec(),
        });
    }
    let tol = smax * RANK_REL_TOL;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    if rank < n_cols {
        let v_t = svd.v_t.as_ref().expect("svd was computed with v");
        let mut columns = Vec::new();
        for (j, s) in svd.singular_values.iter().enumerate() {
            if *s > tol {
                continue;
            }
            // The right singular vector of a dead direction points at the
            // columns that cannot be separated.
            let row = v_t.row(j);
            let peak = row.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
            for (c, v) in row.iter().enumerate() {
                if v.abs() >= 0.5 * peak && !columns.contains(&REGRESSOR_COLUMNS[c]) {
                    columns.push(REGRESSOR_COLUMNS[c]);
                }
            }
        }
        return Err(Error::RankDeficient {
            rank,
            cols: n_cols,
            columns,
        });
    }
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let theta_v = svd
        .solve(&reg.y, tol)
        .map_err(|e| Error::InvalidParams(format!("least-squares solve failed: {e}")))?;
    let mut theta = [0.0; 7];
    for (t, v) in theta.iter_mut().zip(theta_v.iter()) {
        *t = *v;
    }
    let residual = &reg.y - &reg.x * &theta_v;
    let residual_rms_v = (residual.norm_squared() / reg.y.len() as f64).sqrt();
    let params = CombinedParams {
        k0: theta[0],
        r_discharge: -theta[1],
        r_charge: -theta[2],
        k1: -theta[3],
        k2: -theta[4],
        k3: theta[5],
        k4: theta[6],
    };
    Ok(CombinedFit {
        params,
        theta,
        residual_rms_v,
        condition: smax / smin,
        rows_used: reg.rows.len(),
        rows_excluded: reg.excluded,
    })
}
