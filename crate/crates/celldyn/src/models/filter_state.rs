//! Four-state dynamic cell model.
//!
//! The state vector is
//!
//! * `x1` - state of charge,
//! * `x2` - low-pass filtered state of charge,
//! * `x3`, `x4` - an oscillatory pair filtering the applied current.
//!
//! One step advances the state linearly,
//!
//! ```text
//! x1' = x1 - im
//! x2' = w1*x1 + w2*x2 + w3
//! x3' = w4*x3 + w5*x4
//! x4' = -w5*x3 + w4*x4 + im
//! ```
//!
//! where `im` is the rate-corrected current increment from
//! [`crate::cell::peukert_current`]. The terminal voltage is
//!
//! ```text
//! y = w6 + w7*im + w8/(x1 + w9) + w10*x1 + g*x2 + w11*x3 + w12*x4
//! ```
//!
//! with `g` a fixed (non-identified) gain on the filtered-soc state. The
//! twelve `w` coefficients are the identifiable weights.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::cell::{peukert_current, CellParams};
use crate::error::{Error, Result};

fn default_gain() -> f64 {
    10.0
}

/// Weights of the four-state model plus the fixed gain on `x2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterStateParams {
    /// Identified weights `w1..w12` in order.
    pub w: [f64; 12],
    /// Fixed output gain applied to `x2`; not touched by identification.
    #[serde(default = "default_gain")]
    pub fixed_output_gain: f64,
}

impl Default for FilterStateParams {
    fn default() -> Self {
        FilterStateParams {
            w: [0.0; 12],
            fixed_output_gain: default_gain(),
        }
    }
}

impl FilterStateParams {
    pub fn from_weights(w: [f64; 12]) -> Self {
        FilterStateParams {
            w,
            fixed_output_gain: default_gain(),
        }
    }

    /// Finiteness plus the stability and pole-position requirements:
    /// `|w2| < 1`, `w4^2 + w5^2 < 1`, and `w9 > 0` so the reciprocal output
    /// term stays bounded for any soc in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        for (j, v) in self.w.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("w{} is not finite", j + 1)));
            }
        }
        if !self.fixed_output_gain.is_finite() {
            return Err(Error::InvalidParams("fixed_output_gain is not finite".into()));
        }
        if !self.is_stable() {
            return Err(Error::InvalidParams(format!(
                "unstable filter poles: |w2| = {}, w4^2 + w5^2 = {}",
                self.w[1].abs(),
                self.w[3] * self.w[3] + self.w[4] * self.w[4]
            )));
        }
        if self.w[8] <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "w9 must be positive, got {}",
                self.w[8]
            )));
        }
        Ok(())
    }

    /// True when both filter poles lie strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        self.w[1].abs() < 1.0 && self.w[3] * self.w[3] + self.w[4] * self.w[4] < 1.0
    }

    /// Largest pole modulus; decay of the internal states goes as its powers.
    pub fn pole_radius(&self) -> f64 {
        self.w[1]
            .abs()
            .max((self.w[3] * self.w[3] + self.w[4] * self.w[4]).sqrt())
    }
}

/// State transition matrix of the model for the given weights.
pub fn state_matrix(w: &FilterStateParams) -> Matrix4<f64> {
    let [w1, w2, _, w4, w5, ..] = w.w;
    Matrix4::new(
        1.0, 0.0, 0.0, 0.0, //
        w1, w2, 0.0, 0.0, //
        0.0, 0.0, w4, w5, //
        0.0, 0.0, -w5, w4,
    )
}

/// Input contribution of one step: the bias drive on `x2` and the current
/// increment entering `x1` and `x4`.
pub fn drive_vector(i_mod: f64, w: &FilterStateParams) -> Vector4<f64> {
    Vector4::new(-i_mod, w.w[2], 0.0, i_mod)
}

/// Advances the state one sample. `x1` is clamped back to `[0, 1]` after the
/// linear update, mirroring the coulomb-counting clamp.
pub fn filter_state_step(
    x: &Vector4<f64>,
    i: f64,
    w: &FilterStateParams,
    cell: &CellParams,
) -> Vector4<f64> {
    let i_mod = peukert_current(i, cell);
    let mut next = state_matrix(w) * x + drive_vector(i_mod, w);
    next[0] = next[0].clamp(0.0, 1.0);
    next
}

/// Terminal voltage for the current state and applied current.
pub fn filter_state_output(
    x: &Vector4<f64>,
    i: f64,
    w: &FilterStateParams,
    cell: &CellParams,
) -> Result<f64> {
    let i_mod = peukert_current(i, cell);
    let denom = x[0] + w.w[8];
    if denom.abs() < 1e-12 {
        return Err(Error::Domain {
            index: 0,
            reason: format!("x1 + w9 = {denom} vanishes in the output"),
        });
    }
    Ok(w.w[5]
        + w.w[6] * i_mod
        + w.w[7] / denom
        + w.w[9] * x[0]
        + w.fixed_output_gain * x[1]
        + w.w[10] * x[2]
        + w.w[11] * x[3])
}
