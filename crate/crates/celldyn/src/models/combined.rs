//! Static voltage models: four classical single-state variants and the
//! combined form that embeds them all.
//!
//! Each model maps state of charge and applied current to terminal voltage.
//! They share the discharge-positive sign convention and, for the simple
//! variants, a fixed 4.2 V fully-charged reference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn require_soc(value: f64, lo_open: bool, hi_open: bool, op: &'static str) -> Result<()> {
    let lo_ok = if lo_open { value > 0.0 } else { value >= 0.0 };
    let hi_ok = if hi_open { value < 1.0 } else { value <= 1.0 };
    if !(value.is_finite() && lo_ok && hi_ok) {
        return Err(Error::SocOutOfRange { value, op });
    }
    Ok(())
}

/// Shepherd model, `4.2 - r*i - k1/soc`. Requires `soc > 0`.
pub fn shepherd_output(soc: f64, i: f64, r: f64, k1: f64) -> Result<f64> {
    require_soc(soc, true, false, "shepherd_output")?;
    Ok(4.2 - r * i - k1 / soc)
}

/// Unnewehr universal model, `4.2 - r*i - ki*soc`.
pub fn unnewehr_output(soc: f64, i: f64, r: f64, ki: f64) -> Result<f64> {
    require_soc(soc, false, false, "unnewehr_output")?;
    Ok(4.2 - r * i - ki * soc)
}

/// Nernst model, `4.2 - r*i + k1*ln(soc)`. Requires `soc > 0`.
pub fn nernst_output(soc: f64, i: f64, r: f64, k1: f64) -> Result<f64> {
    require_soc(soc, true, false, "nernst_output")?;
    Ok(4.2 - r * i + k1 * soc.ln())
}

/// Nernst model with both logarithmic branches,
/// `4.2 - r*i + k2*ln(soc) + k3*ln(1 - soc)`. Requires `0 < soc < 1`.
pub fn modified_nernst_output(soc: f64, i: f64, r: f64, k2: f64, k3: f64) -> Result<f64> {
    require_soc(soc, true, true, "modified_nernst_output")?;
    Ok(4.2 - r * i + k2 * soc.ln() + k3 * (1.0 - soc).ln())
}

/// Coefficients of the combined model
/// `y = k0 - r(i)*i - k1/soc - k2*soc + k3*ln(soc) + k4*ln(1 - soc)`
/// with separate resistances for discharge and charge current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedParams {
    /// Voltage offset, volts.
    pub k0: f64,
    /// Series resistance while discharging (i > 0), ohms.
    pub r_discharge: f64,
    /// Series resistance while charging (i < 0), ohms.
    pub r_charge: f64,
    /// Reciprocal-soc coefficient.
    pub k1: f64,
    /// Linear soc coefficient.
    pub k2: f64,
    /// ln(soc) coefficient.
    pub k3: f64,
    /// ln(1 - soc) coefficient.
    pub k4: f64,
}

impl CombinedParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("k0", self.k0),
            ("r_discharge", self.r_discharge),
            ("r_charge", self.r_charge),
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} is not finite")));
            }
        }
        if self.r_discharge < 0.0 || self.r_charge < 0.0 {
            return Err(Error::InvalidParams(format!(
                "negative resistance: r_discharge {}, r_charge {}",
                self.r_discharge, self.r_charge
            )));
        }
        Ok(())
    }

    /// Resistance active for the given current; the discharge branch is used
    /// at exactly zero, where the term vanishes anyway.
    pub fn resistance(&self, i: f64) -> f64 {
        if i < 0.0 {
            self.r_charge
        } else {
            self.r_discharge
        }
    }
}

/// Combined model output. Requires `0 < soc < 1`.
pub fn combined_output(soc: f64, i: f64, p: &CombinedParams) -> Result<f64> {
    require_soc(soc, true, true, "combined_output")?;
    Ok(p.k0 - p.resistance(i) * i - p.k1 / soc - p.k2 * soc
        + p.k3 * soc.ln()
        + p.k4 * (1.0 - soc).ln())
}

/// Rest voltage of the combined model, `combined_output` at zero current.
pub fn combined_ocv(soc: f64, p: &CombinedParams) -> Result<f64> {
    combined_output(soc, 0.0, p)
}
