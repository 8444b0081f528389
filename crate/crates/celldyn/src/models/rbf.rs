//! Gaussian radial basis function voltage model.
//!
//! The network maps a small input vector (by default previous terminal
//! voltage, state of charge, and applied current) through `n` Gaussian
//! kernels,
//!
//! ```text
//! y(u) = sum_j w_j * exp(-||z - t_j||^2 / sigma_j^2) + w_{n+1}
//! ```
//!
//! where `z` is the input normalized per component into `[-1, 1]` using the
//! training-set extrema stored with the parameters. Distances are Euclidean
//! in the normalized space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible kernel width in normalized units; training projects
/// widths back to this bound.
pub const SIGMA_MIN: f64 = 1e-3;

/// Signals that may form the network input, in the declared order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RbfInput {
    /// Terminal voltage one sample back. Training uses the measured value,
    /// simulation feeds back the previous prediction.
    PrevVoltage,
    /// Coulomb-counted state of charge at the current sample.
    Soc,
    /// Applied current at the current sample, amps.
    Current,
    /// Applied current one sample back, amps.
    PrevCurrent,
}

/// Default input layout: previous voltage, state of charge, current.
pub fn default_layout() -> Vec<RbfInput> {
    vec![RbfInput::PrevVoltage, RbfInput::Soc, RbfInput::Current]
}

/// Kernel centers, widths, output weights, and the input conditioning of one
/// trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfParams {
    /// Number of Gaussian kernels.
    pub n_kernels: usize,
    /// Kernel centers in normalized input space, `n_kernels` rows of
    /// `input_layout.len()` components.
    pub centers: Vec<Vec<f64>>,
    /// Kernel widths in normalized units, one per kernel.
    pub widths: Vec<f64>,
    /// Output weights, one per kernel plus the trailing bias.
    pub weights: Vec<f64>,
    /// Which signals feed the network, in input order.
    pub input_layout: Vec<RbfInput>,
    /// Per-component `(lo, hi)` raw-signal extrema used to normalize inputs
    /// into `[-1, 1]`.
    pub input_norm: Vec<(f64, f64)>,
}

impl RbfParams {
    pub fn validate(&self) -> Result<()> {
        if self.input_layout.is_empty() {
            return Err(Error::InvalidParams("empty input layout".into()));
        }
        let dim = self.input_layout.len();
        if self.centers.len() != self.n_kernels {
            return Err(Error::DimensionMismatch(format!(
                "{} centers for {} kernels",
                self.centers.len(),
                self.n_kernels
            )));
        }
        if self.widths.len() != self.n_kernels {
            return Err(Error::DimensionMismatch(format!(
                "{} widths for {} kernels",
                self.widths.len(),
                self.n_kernels
            )));
        }
        if self.weights.len() != self.n_kernels + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} kernels plus bias",
                self.weights.len(),
                self.n_kernels
            )));
        }
        if self.input_norm.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "{} normalization ranges for input dimension {dim}",
                self.input_norm.len()
            )));
        }
        for (j, c) in self.centers.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "center {j} has {} components, expected {dim}",
                    c.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParams(format!("center {j} is not finite")));
            }
        }
        for (j, &s) in self.widths.iter().enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "width {j} must be positive and finite, got {s}"
                )));
            }
        }
        if self.weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite output weight".into()));
        }
        for (c, &(lo, hi)) in self.input_norm.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "normalization range {c} is not finite"
                )));
            }
        }
        Ok(())
    }

    /// Normalizes one raw input vector into the network's `[-1, 1]` space.
    /// A degenerate range (`hi == lo`) maps to zero.
    pub fn normalize(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.input_layout.len() {
            return Err(Error::DimensionMismatch(format!(
                "input has {} components, layout expects {}",
                raw.len(),
                self.input_layout.len()
            )));
        }
        Ok(raw
            .iter()
            .zip(&self.input_norm)
            .map(|(&v, &(lo, hi))| {
                let span = hi - lo;
                if span == 0.0 {
                    0.0
                } else {
                    2.0 * (v - lo) / span - 1.0
                }
            })
            .collect())
    }

    /// Kernel activations for a normalized input.
    pub fn activations(&self, z: &[f64]) -> Vec<f64> {
        self.centers
            .iter()
            .zip(&self.widths)
            .map(|(t, &sigma)| {
                let d2: f64 = z.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (sigma * sigma)).exp()
            })
            .collect()
    }
}

/// Network output for a raw (unnormalized) input vector ordered per the
/// declared layout.
pub fn rbf_output(p: &RbfParams, raw: &[f64]) -> Result<f64> {
    let z = p.normalize(raw)?;
    let phi = p.activations(&z);
    let mut y = p.weights[p.n_kernels];
    for (w, a) in p.weights[..p.n_kernels].iter().zip(&phi) {
        y += w * a;
    }
    Ok(y)
}
