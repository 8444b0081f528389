//! Cell-level bookkeeping: capacity, coulombic efficiency, and the
//! state-of-charge recurrence that every model in this crate shares.
//!
//! Sign convention: positive current discharges the cell, negative current
//! charges it. State of charge is dimensionless in `[0, 1]` and one unit of
//! `soc` corresponds to the full nominal capacity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::Trace;

/// Static cell description plus the sampling period used by the discrete
/// recurrences.
///
/// `peukert_n` and `peukert_cp` describe the rate-corrected effective
/// discharge; with `peukert_n = 1` and `peukert_cp` equal to the nominal
/// capacity the correction disappears and [`peukert_current`] reproduces the
/// plain coulomb-counting increment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    /// Nominal capacity in ampere hours.
    pub capacity_ah: f64,
    /// Coulombic efficiency applied while discharging (current > 0).
    pub eta_discharge: f64,
    /// Coulombic efficiency applied while charging (current < 0).
    pub eta_charge: f64,
    /// Upper operational voltage limit, volts.
    pub v_high: f64,
    /// Lower operational voltage limit, volts.
    pub v_low: f64,
    /// Peukert exponent, dimensionless.
    pub peukert_n: f64,
    /// Peukert capacity in ampere hours.
    pub peukert_cp: f64,
    /// Sampling period in hours.
    pub sample_period_h: f64,
}

impl Default for CellParams {
    /// An 8 Ah pouch cell sampled at 1 s with ideal discharge efficiency,
    /// 0.995 charge efficiency, and the Peukert correction disabled.
    fn default() -> Self {
        CellParams {
            capacity_ah: 8.0,
            eta_discharge: 1.0,
            eta_charge: 0.995,
            v_high: 4.2,
            v_low: 3.0,
            peukert_n: 1.0,
            peukert_cp: 8.0,
            sample_period_h: 1.0 / 3600.0,
        }
    }
}

impl CellParams {
    /// Checks every field for finiteness and physical plausibility.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("capacity_ah", self.capacity_ah),
            ("eta_discharge", self.eta_discharge),
            ("eta_charge", self.eta_charge),
            ("v_high", self.v_high),
            ("v_low", self.v_low),
            ("peukert_n", self.peukert_n),
            ("peukert_cp", self.peukert_cp),
            ("sample_period_h", self.sample_period_h),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} is not finite")));
            }
        }
        if self.capacity_ah <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "capacity_ah must be positive, got {}",
                self.capacity_ah
            )));
        }
        for (name, eta) in [
            ("eta_discharge", self.eta_discharge),
            ("eta_charge", self.eta_charge),
        ] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must lie in (0, 1], got {eta}"
                )));
            }
        }
        if self.v_high <= self.v_low {
            return Err(Error::InvalidParams(format!(
                "v_high {} must exceed v_low {}",
                self.v_high, self.v_low
            )));
        }
        if self.peukert_n < 1.0 {
            return Err(Error::InvalidParams(format!(
                "peukert_n must be >= 1, got {}",
                self.peukert_n
            )));
        }
        if self.peukert_cp <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "peukert_cp must be positive, got {}",
                self.peukert_cp
            )));
        }
        if self.sample_period_h <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "sample_period_h must be positive, got {}",
                self.sample_period_h
            )));
        }
        Ok(())
    }

    /// Current in amps corresponding to a 1C rate.
    pub fn c_rate_amps(&self) -> f64 {
        self.capacity_ah
    }

    /// Sampling period in seconds.
    pub fn sample_period_s(&self) -> f64 {
        self.sample_period_h * 3600.0
    }
}

/// State of charge, dimensionless.
///
/// Values are kept inside `[0, 1]` by [`soc_step`]; the raw recurrence may
/// transiently leave the interval before clamping.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Soc(pub f64);

impl Soc {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Result of one state-of-charge update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocUpdate {
    pub soc: Soc,
    /// True when the raw recurrence left `[0, 1]` and the value was clamped.
    pub clamped: bool,
}

/// Coulombic efficiency for the given current under the cell's sign
/// convention: discharge efficiency for `i > 0`, charge efficiency for
/// `i < 0`, discharge efficiency at exactly zero.
pub fn coulombic_efficiency(i: f64, p: &CellParams) -> f64 {
    if i < 0.0 {
        p.eta_charge
    } else {
        p.eta_discharge
    }
}

/// One step of the coulomb-counting recurrence,
/// `soc' = soc - eta(i) * i * dt / capacity`, clamped to `[0, 1]`.
///
/// `i` is in amps, `dt` is the cell sampling period in hours, and the
/// clamping event is reported on the returned [`SocUpdate`].
pub fn soc_step(soc: Soc, i: f64, p: &CellParams) -> SocUpdate {
    let raw = soc.0 - coulombic_efficiency(i, p) * i * p.sample_period_h / p.capacity_ah;
    let clamped = !(0.0..=1.0).contains(&raw);
    SocUpdate {
        soc: Soc(raw.clamp(0.0, 1.0)),
        clamped,
    }
}

/// Rate-corrected effective discharge increment,
/// `eta(i) * sign(i) * |i|^n * dt / cp`.
///
/// The sign of the physical current is restored around the magnitude power
/// law so charging still raises the state of charge. With `n = 1` and
/// `cp = capacity` this equals the plain coulomb-counting increment exactly.
pub fn peukert_current(i: f64, p: &CellParams) -> f64 {
    let eta = coulombic_efficiency(i, p);
    let magnitude = if p.peukert_n == 1.0 {
        i.abs()
    } else {
        i.abs().powf(p.peukert_n)
    };
    eta * i.signum() * magnitude * p.sample_period_h / p.peukert_cp
}

/// Applies [`soc_step`] across a trace.
///
/// Element `k` of the returned series is the state of charge after the
/// currents of samples `0..=k` have acted, so the series has the trace's
/// length and its last element accounts for every sample.
pub fn soc_trajectory(trace: &Trace, soc0: Soc, p: &CellParams) -> Vec<Soc> {
    let mut out = Vec::with_capacity(trace.len());
    let mut soc = soc0;
    for s in trace.samples() {
        soc = soc_step(soc, s.current_a, p).soc;
        out.push(soc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{Sample, Trace};
    use approx::assert_abs_diff_eq;

    fn cell() -> CellParams {
        CellParams::default()
    }

    fn constant_trace(i: f64, n: usize) -> Trace {
        Trace::new(
            (0..n)
                .map(|k| Sample {
                    time_s: k as f64,
                    current_a: i,
                    voltage_v: 3.7,
                    temp_c: None,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn efficiency_selects_by_sign() {
        let p = cell();
        assert_eq!(coulombic_efficiency(8.0, &p), 1.0);
        assert_eq!(coulombic_efficiency(-8.0, &p), 0.995);
        assert_eq!(coulombic_efficiency(0.0, &p), 1.0);
    }

    #[test]
    fn discharge_step_at_one_c() {
        let up = soc_step(Soc(0.5), 8.0, &cell());
        assert_abs_diff_eq!(up.soc.0, 0.5 - 1.0 / 3600.0, epsilon = 1e-15);
        assert_abs_diff_eq!(up.soc.0, 0.4997222, epsilon = 5e-8);
        assert!(!up.clamped);
    }

    #[test]
    fn charge_step_applies_charge_efficiency() {
        let up = soc_step(Soc(0.5), -8.0, &cell());
        assert_abs_diff_eq!(up.soc.0, 0.5 + 0.995 / 3600.0, epsilon = 1e-15);
        assert_abs_diff_eq!(up.soc.0, 0.5002764, epsilon = 5e-8);
        assert!(!up.clamped);
    }

    #[test]
    fn zero_current_is_the_identity() {
        let up = soc_step(Soc(0.62), 0.0, &cell());
        assert_eq!(up.soc.0.to_bits(), 0.62f64.to_bits());
        assert!(!up.clamped);
    }

    #[test]
    fn clamping_reports_and_bounds() {
        let up = soc_step(Soc(1e-5), 200.0, &cell());
        assert_eq!(up.soc.0, 0.0);
        assert!(up.clamped);
        let up = soc_step(Soc(1.0 - 1e-6), -200.0, &cell());
        assert_eq!(up.soc.0, 1.0);
        assert!(up.clamped);
    }

    #[test]
    fn peukert_matches_quoted_values() {
        let p = cell();
        assert_abs_diff_eq!(peukert_current(8.0, &p), 2.7778e-4, epsilon = 1e-8);
        assert_abs_diff_eq!(peukert_current(-8.0, &p), -2.76389e-4, epsilon = 1e-9);
        assert_eq!(peukert_current(0.0, &p), 0.0);
    }

    #[test]
    fn peukert_with_unit_exponent_equals_plain_increment() {
        let p = cell();
        for &i in &[-200.0, -8.0, -1.0, -0.1, 0.1, 1.0, 8.0, 200.0] {
            let plain = coulombic_efficiency(i, &p) * i * p.sample_period_h / p.capacity_ah;
            let corrected = peukert_current(i, &p);
            assert_abs_diff_eq!(corrected, plain, epsilon = 1e-12 * plain.abs().max(1e-30));
        }
    }

    #[test]
    fn peukert_exponent_amplifies_high_rate_draw() {
        let p = CellParams {
            peukert_n: 1.1,
            ..cell()
        };
        let one_c = peukert_current(8.0, &p) / 8.0;
        let four_c = peukert_current(32.0, &p) / 32.0;
        assert!(
            four_c > one_c,
            "per-amp draw should grow with rate when n > 1"
        );
    }

    #[test]
    fn full_discharge_of_half_capacity_in_half_hour() {
        let trace = constant_trace(8.0, 1800);
        let series = soc_trajectory(&trace, Soc(1.0), &cell());
        assert_eq!(series.len(), 1800);
        assert_abs_diff_eq!(series.last().unwrap().0, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn rest_trajectory_is_constant() {
        let trace = constant_trace(0.0, 500);
        let series = soc_trajectory(&trace, Soc(0.6), &cell());
        assert!(series.iter().all(|s| s.0.to_bits() == 0.6f64.to_bits()));
    }

    #[test]
    fn discharge_then_charge_round_trip() {
        let p = cell();
        // Remove 1 Ah, then put back 1/eta_charge Ah; the efficiency-weighted
        // charge balance returns the cell to its starting point.
        let n = 450; // 450 s at 8 A = 1 Ah
        let mut soc = Soc(0.9);
        for _ in 0..n {
            soc = soc_step(soc, 8.0, &p).soc;
        }
        for _ in 0..n {
            soc = soc_step(soc, -8.0 / p.eta_charge, &p).soc;
        }
        assert_abs_diff_eq!(soc.0, 0.9, epsilon = 1e-9);
    }

    #[test]
    fn trajectory_equals_left_fold() {
        let p = cell();
        let currents: Vec<f64> = (0..200)
            .map(|k| 10.0 * ((k as f64) * 0.37).sin())
            .collect();
        let trace = Trace::new(
            currents
                .iter()
                .enumerate()
                .map(|(k, &i)| Sample {
                    time_s: k as f64,
                    current_a: i,
                    voltage_v: 3.7,
                    temp_c: None,
                })
                .collect(),
        )
        .unwrap();
        let series = soc_trajectory(&trace, Soc(0.7), &p);
        let folded = currents.iter().fold(Soc(0.7), |s, &i| soc_step(s, i, &p).soc);
        assert_eq!(series.last().unwrap().0.to_bits(), folded.0.to_bits());
    }

    #[test]
    fn default_params_validate() {
        cell().validate().unwrap();
    }

    #[test]
    fn bad_params_are_rejected() {
        let mut p = cell();
        p.capacity_ah = -1.0;
        assert!(p.validate().is_err());
        let mut p = cell();
        p.eta_charge = 0.0;
        assert!(p.validate().is_err());
        let mut p = cell();
        p.sample_period_h = 0.0;
        assert!(p.validate().is_err());
        let mut p = cell();
        p.peukert_n = 0.8;
        assert!(p.validate().is_err());
    }
}
