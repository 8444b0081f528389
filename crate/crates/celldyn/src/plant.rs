//! Synthetic cell and sensor: generates characterization profiles, replays a
//! ground-truth model over them, and corrupts the result like a real data
//! acquisition chain would.
//!
//! The plant exists so every fitting and estimation stage in this crate can
//! be exercised against data with a known answer. Profiles are generated
//! deterministically (seeded where random), the truth model is any model
//! family except the feedback network, and the sensor stage adds Gaussian
//! noise and bias on current plus Gaussian noise and ADC quantization on
//! voltage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cell::{peukert_current, soc_step, CellParams, Soc};
use crate::error::{Error, Result};
use crate::models::{
    combined_output, filter_state_output, filter_state_step, CombinedParams, FilterStateParams,
    ModelParams, ScheduledParams, SOC_EVAL_HI, SOC_EVAL_LO,
};
use crate::trace::{Sample, Trace};

/// Profile families the generators can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// Alternating discharge pulses and rests down the soc window, then
    /// charge pulses and rests back up.
    Pulse,
    /// Seeded, highly dynamic current with regenerative bursts and net
    /// discharge, repeated until the soc window is traversed.
    DriveCycle,
    /// Constant current for a fixed duration.
    Constant,
    /// Zero current for a fixed duration.
    Rest,
}

/// Parameters of a generated profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    /// Pulse or constant amplitude as a multiple of the 1C current.
    pub rate_c: f64,
    /// Pulse length in seconds.
    pub pulse_s: f64,
    /// Rest length between pulses in seconds.
    pub rest_s: f64,
    /// Top of the soc window the profile traverses.
    pub soc_hi: f64,
    /// Bottom of the soc window.
    pub soc_lo: f64,
    /// Duration for the constant and rest kinds, seconds.
    pub duration_s: f64,
}

impl ProfileSpec {
    /// Pulse suite at the given rate over the default `[0.35, 0.95]` window:
    /// 60 s pulses, 300 s rests.
    pub fn pulses(rate_c: f64) -> Self {
        ProfileSpec {
            kind: ProfileKind::Pulse,
            rate_c,
            pulse_s: 60.0,
            rest_s: 300.0,
            soc_hi: 0.95,
            soc_lo: 0.35,
            duration_s: 0.0,
        }
    }

    /// Drive cycle over a deep soc window.
    pub fn drive_cycle() -> Self {
        ProfileSpec {
            kind: ProfileKind::DriveCycle,
            rate_c: 25.0, // amplitude cap
            pulse_s: 0.0,
            rest_s: 0.0,
            soc_hi: 0.9,
            soc_lo: 0.25,
            duration_s: 0.0,
        }
    }

    pub fn constant(rate_c: f64, duration_s: f64) -> Self {
        ProfileSpec {
            kind: ProfileKind::Constant,
            rate_c,
            pulse_s: 0.0,
            rest_s: 0.0,
            soc_hi: 1.0,
            soc_lo: 0.0,
            duration_s,
        }
    }

    pub fn rest(duration_s: f64) -> Self {
        ProfileSpec::constant(0.0, duration_s)
    }

    fn validate(&self, cell: &CellParams) -> Result<()> {
        if !(self.soc_lo >= 0.0 && self.soc_hi <= 1.0 && self.soc_hi > self.soc_lo) {
            return Err(Error::InfeasibleProfile(format!(
                "soc window [{}, {}] is not an increasing sub-interval of [0, 1]",
                self.soc_lo, self.soc_hi
            )));
        }
        let per_sample = self.rate_c.abs() * cell.c_rate_amps() * cell.sample_period_h
            / cell.capacity_ah;
        if per_sample > self.soc_hi - self.soc_lo {
            return Err(Error::InfeasibleProfile(format!(
                "one sample at {}C moves soc by {per_sample:.4}, more than the window height",
                self.rate_c
            )));
        }
        Ok(())
    }
}

/// Currents of a pulse characterization suite.
///
/// Starting at the top of the soc window the profile alternates discharge
/// pulse and rest until the bottom of the window is reached (the final pulse
/// is truncated to land on it), then climbs back with charge pulses and
/// rests. The efficiency-weighted charge balance is tracked with the same
/// recurrence the rest of the crate uses, so the traversal is exact.
pub fn gen_pulse_profile(spec: &ProfileSpec, cell: &CellParams) -> Result<Vec<f64>> {
    cell.validate()?;
    spec.validate(cell)?;
    if spec.kind != ProfileKind::Pulse {
        return Err(Error::InfeasibleProfile(format!(
            "gen_pulse_profile asked to build a {:?} profile",
            spec.kind
        )));
    }
    if spec.rate_c <= 0.0 || spec.pulse_s < cell.sample_period_s() {
        return Err(Error::InfeasibleProfile(format!(
            "pulse rate {}C / length {} s cannot form a pulse",
            spec.rate_c, spec.pulse_s
        )));
    }
    let amps = spec.rate_c * cell.c_rate_amps();
    let pulse_n = (spec.pulse_s / cell.sample_period_s()).round() as usize;
    let rest_n = (spec.rest_s / cell.sample_period_s()).round() as usize;
    let mut currents = Vec::new();
    let mut soc = Soc(spec.soc_hi);

    // Discharge leg.
    while soc.0 > spec.soc_lo {
        for _ in 0..pulse_n {
            if soc.0 <= spec.soc_lo {
                break;
            }
            currents.push(amps);
            soc = soc_step(soc, amps, cell).soc;
        }
        currents.extend(std::iter::repeat(0.0).take(rest_n));
    }
    // Charge leg.
    while soc.0 < spec.soc_hi {
        for _ in 0..pulse_n {
            if soc.0 >= spec.soc_hi {
                break;
            }
            currents.push(-amps);
            soc = soc_step(soc, -amps, cell).soc;
        }
        currents.extend(std::iter::repeat(0.0).take(rest_n));
    }
    Ok(currents)
}

/// Currents of a seeded drive cycle: a slow band-limited base, raised-cosine
/// acceleration and regenerative-braking bursts, a positive drift giving net
/// discharge per repetition, everything capped at `rate_c` times the 1C
/// current. Generation stops when the tracked soc reaches the bottom of the
/// window.
pub fn gen_drive_cycle(spec: &ProfileSpec, cell: &CellParams, seed: u64) -> Result<Vec<f64>> {
    cell.validate()?;
    spec.validate(cell)?;
    if spec.kind != ProfileKind::DriveCycle {
        return Err(Error::InfeasibleProfile(format!(
            "gen_drive_cycle asked to build a {:?} profile",
            spec.kind
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dt = cell.sample_period_s();
    let c = cell.c_rate_amps();
    let cap = spec.rate_c.abs() * c;
    let rep_n = (600.0 / dt).round().max(1.0) as usize;

    // Slow base: first-order filtered white noise, 8 s time constant,
    // one-C standard deviation.
    let alpha = (-dt / 8.0).exp();
    let sigma_b = 1.0 * c;
    let sigma_e = sigma_b * (1.0 - alpha * alpha).sqrt();
    let gauss = Normal::new(0.0, 1.0).unwrap();

    let mut currents = Vec::new();
    let mut soc = Soc(spec.soc_hi);
    let mut base = 0.0f64;
    let max_reps = 200;
    'reps: for _ in 0..max_reps {
        // One repetition is drafted in full so its mean can be pinned, then
        // consumed sample by sample against the soc budget.
        let mut rep = Vec::with_capacity(rep_n);
        for _ in 0..rep_n {
            base = alpha * base + sigma_e * gauss.sample(&mut rng);
            rep.push(base);
        }
        // Bursts: arrival gaps ~20 s, 2..8 s long, discharge-heavy.
        let mut t = rng.gen_range(0.0..20.0);
        while t < rep_n as f64 * dt {
            let dur = rng.gen_range(2.0..8.0);
            let discharge = rng.gen_bool(0.65);
            let amp = if discharge {
                rng.gen_range(2.0..6.0) * c
            } else {
                -rng.gen_range(1.5..4.5) * c
            };
            let k0 = (t / dt) as usize;
            let kn = ((t + dur) / dt) as usize;
            for k in k0..kn.min(rep_n) {
                let u = (k - k0) as f64 / (kn - k0).max(1) as f64;
                rep[k] += amp * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * u).cos());
            }
            t += dur + rng.gen_range(10.0..40.0);
        }
        // Pin the repetition mean to a 0.6C discharge drift, then cap.
        let mean = rep.iter().sum::<f64>() / rep.len() as f64;
        for v in &mut rep {
            *v += 0.6 * c - mean;
            *v = v.clamp(-cap, cap);
        }
        for v in rep {
            currents.push(v);
            soc = soc_step(soc, v, cell).soc;
            if soc.0 <= spec.soc_lo {
                break 'reps;
            }
        }
    }
    if currents.is_empty() {
        return Err(Error::InfeasibleProfile("drive cycle produced no samples".into()));
    }
    Ok(currents)
}

/// Currents for the constant and rest kinds.
pub fn gen_constant_profile(spec: &ProfileSpec, cell: &CellParams) -> Result<Vec<f64>> {
    cell.validate()?;
    let n = (spec.duration_s / cell.sample_period_s()).round() as usize;
    if n == 0 {
        return Err(Error::InfeasibleProfile(format!(
            "duration {} s shorter than one sample",
            spec.duration_s
        )));
    }
    let amps = match spec.kind {
        ProfileKind::Constant => spec.rate_c * cell.c_rate_amps(),
        ProfileKind::Rest => 0.0,
        other => {
            return Err(Error::InfeasibleProfile(format!(
                "gen_constant_profile asked to build a {other:?} profile"
            )))
        }
    };
    Ok(vec![amps; n])
}

/// Ground-truth replay of a model over a current profile.
#[derive(Debug, Clone)]
pub struct PlantRun {
    /// Times, currents, and exact (noise-free) terminal voltages.
    pub trace: Trace,
    /// Exact state of charge at each sample instant, aligned with the
    /// voltages: element `k` is the soc the voltage of sample `k` was
    /// computed from, before that sample's current acts.
    pub soc: Vec<Soc>,
    /// Number of samples at which the soc recurrence had to be clamped.
    pub clamp_events: usize,
}

fn filter_truth_run(
    cell: &CellParams,
    soc0: f64,
    currents: &[f64],
    select: impl Fn(f64) -> FilterStateParams,
) -> Result<(Vec<f64>, Vec<Soc>, usize)> {
    let mut x = nalgebra::Vector4::new(soc0, 0.0, 0.0, 0.0);
    let mut voltages = Vec::with_capacity(currents.len());
    let mut socs = Vec::with_capacity(currents.len());
    let mut clamps = 0usize;
    for (k, &i) in currents.iter().enumerate() {
        let w = select(i);
        socs.push(Soc(x[0]));
        let y = filter_state_output(&x, i, &w, cell).map_err(|e| match e {
            Error::Domain { reason, .. } => Error::Domain { index: k, reason },
            other => other,
        })?;
        voltages.push(y);
        let raw = x[0] - peukert_current(i, cell);
        if !(0.0..=1.0).contains(&raw) {
            clamps += 1;
        }
        x = filter_state_step(&x, i, &w, cell);
    }
    Ok((voltages, socs, clamps))
}

/// Replays the truth model over the profile and records exact voltage and
/// soc per sample.
///
/// Dynamic truth models start from rest: internal filter states at zero,
/// which is their zero-current equilibrium. The feedback network family is
/// not accepted as a truth model because it would need a measured voltage to
/// seed itself.
pub fn plant_simulate(
    cell: &CellParams,
    truth: &ModelParams,
    soc0: f64,
    currents: &[f64],
) -> Result<PlantRun> {
    cell.validate()?;
    truth.validate()?;
    if currents.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if !(0.0..=1.0).contains(&soc0) {
        return Err(Error::SocOutOfRange {
            value: soc0,
            op: "plant_simulate",
        });
    }
    let (voltages, socs, clamp_events) = match truth {
        ModelParams::Combined(p) => {
            let mut soc = Soc(soc0);
            let mut voltages = Vec::with_capacity(currents.len());
            let mut socs = Vec::with_capacity(currents.len());
            let mut clamps = 0usize;
            for (k, &i) in currents.iter().enumerate() {
                socs.push(soc);
                let clamped = soc.0.clamp(SOC_EVAL_LO, SOC_EVAL_HI);
                let y = combined_output(clamped, i, p).map_err(|e| match e {
                    Error::SocOutOfRange { value, op } => Error::Domain {
                        index: k,
                        reason: format!("soc {value} out of range in {op}"),
                    },
                    other => other,
                })?;
                voltages.push(y);
                let up = soc_step(soc, i, cell);
                if up.clamped {
                    clamps += 1;
                }
                soc = up.soc;
            }
            (voltages, socs, clamps)
        }
        ModelParams::FilterState(p) => {
            let p = p.clone();
            filter_truth_run(cell, soc0, currents, move |_| p.clone())?
        }
        ModelParams::Scheduled(p) => {
            let p = p.clone();
            filter_truth_run(cell, soc0, currents, move |i| p.select(i).clone())?
        }
        ModelParams::Rbf(_) => {
            return Err(Error::FamilyMismatch {
                family: "rbf",
                op: "plant_simulate",
            })
        }
    };
    let dt = cell.sample_period_s();
    let samples = currents
        .iter()
        .zip(&voltages)
        .enumerate()
        .map(|(k, (&i, &v))| Sample {
            time_s: k as f64 * dt,
            current_a: i,
            voltage_v: v,
            temp_c: None,
        })
        .collect();
    Ok(PlantRun {
        trace: Trace::new(samples)?,
        soc: socs,
        clamp_events,
    })
}

/// Data acquisition model applied on top of exact plant output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    /// Standard deviation of the additive voltage noise, volts.
    pub v_noise_sigma_v: f64,
    /// Standard deviation of the additive current noise, amps.
    pub i_noise_sigma_a: f64,
    /// Constant current-sensor bias, amps.
    pub i_bias_a: f64,
    /// ADC resolution in bits; zero disables quantization.
    pub adc_bits: u32,
    /// ADC full-scale range in volts.
    pub adc_fullscale_v: f64,
}

impl Default for SensorConfig {
    /// 1 mV voltage noise into a 10-bit, 0..5 V converter; 0.1 A current
    /// noise, no bias.
    fn default() -> Self {
        SensorConfig {
            v_noise_sigma_v: 1e-3,
            i_noise_sigma_a: 0.1,
            i_bias_a: 0.0,
            adc_bits: 10,
            adc_fullscale_v: 5.0,
        }
    }
}

impl SensorConfig {
    /// Passthrough sensor: no noise, no bias, no quantization.
    pub fn ideal() -> Self {
        SensorConfig {
            v_noise_sigma_v: 0.0,
            i_noise_sigma_a: 0.0,
            i_bias_a: 0.0,
            adc_bits: 0,
            adc_fullscale_v: 5.0,
        }
    }

    /// Width of one ADC code, volts. Zero when quantization is disabled.
    pub fn lsb_v(&self) -> f64 {
        if self.adc_bits == 0 {
            0.0
        } else {
            self.adc_fullscale_v / (1u64 << self.adc_bits) as f64
        }
    }

    /// RMS of the quantization error for a busy signal, `lsb / sqrt(12)`.
    pub fn quantization_floor_v(&self) -> f64 {
        self.lsb_v() / 12f64.sqrt()
    }

    /// Total voltage-error variance of this sensor: Gaussian noise plus the
    /// uniform quantization error, treated as independent.
    pub fn voltage_noise_variance(&self) -> f64 {
        let q = self.quantization_floor_v();
        self.v_noise_sigma_v * self.v_noise_sigma_v + q * q
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("v_noise_sigma_v", self.v_noise_sigma_v),
            ("i_noise_sigma_a", self.i_noise_sigma_a),
            ("i_bias_a", self.i_bias_a),
            ("adc_fullscale_v", self.adc_fullscale_v),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} is not finite")));
            }
        }
        if self.v_noise_sigma_v < 0.0 || self.i_noise_sigma_a < 0.0 {
            return Err(Error::InvalidParams("negative noise sigma".into()));
        }
        if self.adc_bits > 0 && self.adc_fullscale_v <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "adc_fullscale_v must be positive, got {}",
                self.adc_fullscale_v
            )));
        }
        Ok(())
    }
}

/// Quantizes a voltage to the sensor's ADC grid; identity when quantization
/// is disabled.
pub fn quantize_voltage(v: f64, sensor: &SensorConfig) -> f64 {
    let lsb = sensor.lsb_v();
    if lsb == 0.0 {
        v
    } else {
        (v / lsb).round() * lsb
    }
}

/// Applies the sensor model to an exact trace: bias plus Gaussian noise on
/// current, Gaussian noise then ADC quantization on voltage. Deterministic
/// for a given seed; the current draw precedes the voltage draw at each
/// sample.
pub fn apply_sensor(trace: &Trace, sensor: &SensorConfig, seed: u64) -> Result<Trace> {
    sensor.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, 1.0).unwrap();
    let samples = trace
        .samples()
        .iter()
        .map(|s| {
            let i_noise: f64 = gauss.sample(&mut rng);
            let v_noise: f64 = gauss.sample(&mut rng);
            let i = s.current_a + sensor.i_bias_a + sensor.i_noise_sigma_a * i_noise;
            let v = quantize_voltage(s.voltage_v + sensor.v_noise_sigma_v * v_noise, sensor);
            Sample {
                time_s: s.time_s,
                current_a: i,
                voltage_v: v,
                temp_c: s.temp_c,
            }
        })
        .collect();
    Trace::new(samples)
}

/// Default dynamic ground truth: a stable filter-state cell with a visible
/// multi-second relaxation carried by the oscillatory current filter, a
/// 1.7 mOhm effective series resistance, and an open-circuit curve spanning
/// 3.0 V to 4.2 V over the full soc range. The filtered-soc state is left
/// unused so the model is exactly at equilibrium when started from rest.
pub fn truth_relaxing() -> FilterStateParams {
    FilterStateParams::from_weights([
        0.0,                // w1: filtered-soc drive off
        0.9,                // w2
        0.0,                // w3
        0.965,              // w4: slow, mildly oscillatory recovery
        0.06,               // w5
        3.6,                // w6: voltage offset
        -50.0,              // w7: series drop on the rate-corrected current
        -0.24,              // w8: low-soc knee
        0.4,                // w9
        0.7714285714285714, // w10: linear ocv slope
        -4.0,               // w11
        -2.0,               // w12
    ])
}

/// Ground truth with a single fast-settling current filter (the rotation
/// component is zero), same open-circuit span as [`truth_relaxing`]. Used
/// where short memory is wanted, for example highly dynamic drive cycles.
pub fn truth_fast() -> FilterStateParams {
    FilterStateParams::from_weights([
        0.0, 0.9, 0.0, 0.82, 0.0, 3.6, -50.0, -0.15, 0.25, 0.72, 0.0, -2.0,
    ])
}

/// Static combined-model ground truth.
pub fn truth_static() -> CombinedParams {
    CombinedParams {
        k0: 3.95,
        r_discharge: 0.004,
        r_charge: 0.0045,
        k1: 0.02,
        k2: -0.2,
        k3: 0.06,
        k4: -0.02,
    }
}

/// Scheduled ground truth: effective series resistance and relaxation
/// weights change with current magnitude across the default bin edges.
pub fn truth_scheduled(cell: &CellParams) -> ScheduledParams {
    let mut low = truth_relaxing();
    let mut mid = truth_relaxing();
    mid.w[6] = -58.0;
    mid.w[10] = -3.4;
    mid.w[11] = -1.6;
    let mut high = truth_relaxing();
    high.w[6] = -68.0;
    high.w[10] = -2.8;
    high.w[11] = -1.2;
    low.w[6] = -50.0;
    ScheduledParams::new(ScheduledParams::default_edges(cell), vec![low, mid, high])
        .expect("default schedule is well formed")
}
