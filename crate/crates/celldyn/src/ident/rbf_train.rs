//! Kalman training of the radial-basis voltage network.
//!
//! Training is teacher-forced: the previous-voltage input of every row is
//! the measured voltage one sample back, never the network's own output, so
//! each row's gradient is an ordinary partial derivative with no recursion
//! through time. Simulation then runs the trained network in feedback.
//!
//! Kernel centers are seeded by farthest-point sampling over the normalized
//! training rows, which is deterministic and nested: the first `k` centers
//! chosen for a larger network are exactly the centers a `k`-kernel network
//! would get. The starting width is the median pairwise distance of a
//! deterministic subsample of the rows, independent of the kernel count, so
//! a larger network strictly contains every function a smaller one can
//! represent. The output weights are always adapted; centers and widths
//! join the parameter vector unless the weights-only mode is chosen.

use nalgebra::{DMatrix, DVector};

use crate::cell::{soc_step, CellParams, Soc};
use crate::error::{Error, Result};
use crate::models::{RbfInput, RbfParams, SIGMA_MIN};
use crate::trace::Trace;

/// Tuning of the network trainer.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfTrainConfig {
    pub n_kernels: usize,
    /// Signals feeding the network, in input order.
    pub input_layout: Vec<RbfInput>,
    /// Passes over the record; the parameter covariance carries across.
    pub passes: usize,
    /// Scalar measurement-noise variance.
    pub meas_noise_r: f64,
    /// Prior variance of output weights and bias.
    pub p0_weights: f64,
    /// Prior variance of center coordinates.
    pub p0_centers: f64,
    /// Prior variance of widths.
    pub p0_widths: f64,
    /// Multiplier on the data-derived starting width. Shared by every
    /// kernel, so nesting across kernel counts is preserved.
    pub width_scale: f64,
    /// Adapt only the output weights and bias, leaving the seeded centers
    /// and widths untouched. This makes training a linear estimation
    /// problem.
    pub weights_only: bool,
}

impl Default for RbfTrainConfig {
    fn default() -> Self {
        RbfTrainConfig {
            n_kernels: 25,
            input_layout: crate::models::default_layout(),
            passes: 3,
            meas_noise_r: 1e-4,
            p0_weights: 1e2,
            p0_centers: 1e0,
            p0_widths: 2.5e-1,
            width_scale: 1.0,
            weights_only: false,
        }
    }
}

impl RbfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_kernels == 0 {
            return Err(Error::InvalidParams("n_kernels must be at least 1".into()));
        }
        if self.input_layout.is_empty() {
            return Err(Error::InvalidParams("empty input layout".into()));
        }
        if self.passes == 0 {
            return Err(Error::InvalidParams("passes must be at least 1".into()));
        }
        for (name, v) in [
            ("meas_noise_r", self.meas_noise_r),
            ("p0_weights", self.p0_weights),
            ("p0_centers", self.p0_centers),
            ("p0_widths", self.p0_widths),
            ("width_scale", self.width_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct RbfTrainResult {
    pub params: RbfParams,
    /// Teacher-forced innovation rms of the final pass, volts.
    pub train_rms_v: f64,
    /// Innovation rms of every pass, in order.
    pub pass_rms_v: Vec<f64>,
}

/// Raw training rows and targets for a trace, in the layout's input order.
///
/// Row `k` pairs the measured voltage of sample `k` with the inputs the
/// simulator would present at that sample, except that the previous-voltage
/// slot holds the measured value. The first row reuses its own voltage as
/// the previous-voltage seed and zero as the previous current, exactly as
/// simulation does when started from rest.
fn gather_rows(
    trace: &Trace,
    cell: &CellParams,
    soc0: f64,
    layout: &[RbfInput],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let samples = trace.samples();
    let mut rows = Vec::with_capacity(samples.len());
    let mut targets = Vec::with_capacity(samples.len());
    let mut soc = Soc(soc0);
    let mut v_prev = samples[0].voltage_v;
    let mut i_prev = 0.0;
    for s in samples {
        let row: Vec<f64> = layout
            .iter()
            .map(|which| match which {
                RbfInput::PrevVoltage => v_prev,
                RbfInput::Soc => soc.0,
                RbfInput::Current => s.current_a,
                RbfInput::PrevCurrent => i_prev,
            })
            .collect();
        rows.push(row);
        targets.push(s.voltage_v);
        v_prev = s.voltage_v;
        i_prev = s.current_a;
        soc = soc_step(soc, s.current_a, cell).soc;
    }
    (rows, targets)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Farthest-point sampling over the rows: starts from the point farthest
/// from the centroid, then repeatedly takes the point farthest from
/// everything chosen so far. Ties break toward the lower index, so the
/// selection is deterministic and nested in `k`.
fn farthest_point_indices(rows: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = rows.len();
    let dim = rows[0].len();
    let mut centroid = vec![0.0; dim];
    for r in rows {
        for (c, v) in centroid.iter_mut().zip(r) {
            *c += v;
        }
    }
    for c in &mut centroid {
        *c /= n as f64;
    }
    let first = (0..n)
        .max_by(|&a, &b| {
            sq_dist(&rows[a], &centroid)
                .partial_cmp(&sq_dist(&rows[b], &centroid))
                .unwrap()
                .then(b.cmp(&a)) // lower index wins ties
        })
        .unwrap();
    let mut chosen = vec![first];
    let mut min_d: Vec<f64> = rows.iter().map(|r| sq_dist(r, &rows[first])).collect();
    while chosen.len() < k {
        let next = (0..n)
            .max_by(|&a, &b| min_d[a].partial_cmp(&min_d[b]).unwrap().then(b.cmp(&a)))
            .unwrap();
        chosen.push(next);
        for (d, r) in min_d.iter_mut().zip(rows) {
            *d = d.min(sq_dist(r, &rows[next]));
        }
    }
    chosen
}

/// Seeds an untrained network from a record: normalization extrema from the
/// data, centers by farthest-point sampling, a common data-derived width,
/// zero weights, and the mean measured voltage as bias.
pub fn init_rbf(
    trace: &Trace,
    cell: &CellParams,
    soc0: f64,
    cfg: &RbfTrainConfig,
) -> Result<RbfParams> {
    cell.validate()?;
    trace.check_period(cell.sample_period_h)?;
    cfg.validate()?;
    if !(0.0..=1.0).contains(&soc0) {
        return Err(Error::SocOutOfRange {
            value: soc0,
            op: "init_rbf",
        });
    }
    let (rows, targets) = gather_rows(trace, cell, soc0, &cfg.input_layout);
    if cfg.n_kernels > rows.len() {
        return Err(Error::InvalidParams(format!(
            "{} kernels requested from {} training rows",
            cfg.n_kernels,
            rows.len()
        )));
    }
    let dim = cfg.input_layout.len();
    let mut input_norm = vec![(f64::INFINITY, f64::NEG_INFINITY); dim];
    for r in &rows {
        for (c, v) in r.iter().enumerate() {
            input_norm[c].0 = input_norm[c].0.min(*v);
            input_norm[c].1 = input_norm[c].1.max(*v);
        }
    }
    let mut params = RbfParams {
        n_kernels: cfg.n_kernels,
        centers: Vec::new(),
        widths: Vec::new(),
        weights: vec![0.0; cfg.n_kernels + 1],
        input_layout: cfg.input_layout.clone(),
        input_norm,
    };
    let normalized: Vec<Vec<f64>> = rows.iter().map(|r| params.normalize(r).unwrap()).collect();
    let chosen = farthest_point_indices(&normalized, cfg.n_kernels);
    params.centers = chosen.iter().map(|&i| normalized[i].clone()).collect();

    // Width from the data alone, not the kernel count: the median pairwise
    // distance of an evenly strided subsample of the rows.
    let stride = (normalized.len() / 512).max(1);
    let sub: Vec<&Vec<f64>> = normalized.iter().step_by(stride).take(512).collect();
    let mut dists = Vec::with_capacity(sub.len() * (sub.len() - 1) / 2);
    for (a, ra) in sub.iter().enumerate() {
        for rb in &sub[a + 1..] {
            dists.push(sq_dist(ra, rb).sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let base = if dists.is_empty() {
        1.0
    } else {
        dists[dists.len() / 2]
    };
    let width = (base * cfg.width_scale).max(SIGMA_MIN);
    params.widths = vec![width; cfg.n_kernels];
    params.weights[cfg.n_kernels] = targets.iter().sum::<f64>() / targets.len() as f64;
    Ok(params)
}

/// Output gradient of the network at one normalized input, laid out as
/// `[weights, bias, centers kernel-major, widths]`. Only the leading
/// `n + 1` entries are populated in weights-only mode.
fn output_gradient(
    params: &RbfParams,
    phi: &[f64],
    z: &[f64],
    weights_only: bool,
    g: &mut DVector<f64>,
) {
    let n = params.n_kernels;
    let dim = params.input_layout.len();
    for j in 0..n {
        g[j] = phi[j];
    }
    g[n] = 1.0;
    if weights_only {
        return;
    }
    for j in 0..n {
        let w_phi = params.weights[j] * phi[j];
        let sigma = params.widths[j];
        let inv_s2 = 1.0 / (sigma * sigma);
        let mut d2 = 0.0;
        for c in 0..dim {
            let diff = z[c] - params.centers[j][c];
            d2 += diff * diff;
            g[n + 1 + j * dim + c] = w_phi * 2.0 * diff * inv_s2;
        }
        g[n + 1 + n * dim + j] = w_phi * 2.0 * d2 / (sigma * sigma * sigma);
    }
}

/// Trains a network starting from an explicit seed. See [`train_rbf`].
pub fn train_rbf_from(
    trace: &Trace,
    cell: &CellParams,
    soc0: f64,
    cfg: &RbfTrainConfig,
    mut params: RbfParams,
) -> Result<RbfTrainResult> {
    cell.validate()?;
    trace.check_period(cell.sample_period_h)?;
    cfg.validate()?;
    params.validate()?;
    if params.n_kernels != cfg.n_kernels || params.input_layout != cfg.input_layout {
        return Err(Error::DimensionMismatch(
            "seed network does not match the training configuration".into(),
        ));
    }
    let (rows, targets) = gather_rows(trace, cell, soc0, &cfg.input_layout);
    let normalized: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| params.normalize(r))
        .collect::<Result<_>>()?;

    let n = cfg.n_kernels;
    let dim = cfg.input_layout.len();
    let m = if cfg.weights_only {
        n + 1
    } else {
        n + 1 + n * dim + n
    };
    let mut p = DMatrix::<f64>::zeros(m, m);
    for j in 0..=n {
        p[(j, j)] = cfg.p0_weights;
    }
    if !cfg.weights_only {
        for j in 0..n * dim {
            p[(n + 1 + j, n + 1 + j)] = cfg.p0_centers;
        }
        for j in 0..n {
            p[(n + 1 + n * dim + j, n + 1 + n * dim + j)] = cfg.p0_widths;
        }
    }
    let mut g = DVector::<f64>::zeros(m);
    let mut pass_rms_v = Vec::with_capacity(cfg.passes);
    for _ in 0..cfg.passes {
        let mut sq_sum = 0.0;
        for (z, &d) in normalized.iter().zip(&targets) {
            let phi = params.activations(z);
            let mut y = params.weights[n];
            for (w, a) in params.weights[..n].iter().zip(&phi) {
                y += w * a;
            }
            let e = d - y;
            sq_sum += e * e;
            output_gradient(&params, &phi, z, cfg.weights_only, &mut g);
            let pct = &p * &g;
            let s = g.dot(&pct) + cfg.meas_noise_r;
            let l = pct / s;
            for j in 0..=n {
                params.weights[j] += l[j] * e;
            }
            if !cfg.weights_only {
                for j in 0..n {
                    for c in 0..dim {
                        params.centers[j][c] += l[n + 1 + j * dim + c] * e;
                    }
                    let sigma = &mut params.widths[j];
                    *sigma = (*sigma + l[n + 1 + n * dim + j] * e).max(SIGMA_MIN);
                }
            }
            // The update is the symmetric rank-1 matrix l lᵀ s, so the
            // covariance stays symmetric to rounding without repair.
            p.ger(-s, &l, &l, 1.0);
        }
        pass_rms_v.push((sq_sum / targets.len() as f64).sqrt());
    }
    let train_rms_v = *pass_rms_v.last().expect("at least one pass");
    Ok(RbfTrainResult {
        params,
        train_rms_v,
        pass_rms_v,
    })
}

/// Seeds and trains a network on a measured record. `soc0` is the known
/// state of charge at the start of the record.
pub fn train_rbf(
    trace: &Trace,
    cell: &CellParams,
    soc0: f64,
    cfg: &RbfTrainConfig,
) -> Result<RbfTrainResult> {
    let seed = init_rbf(trace, cell, soc0, cfg)?;
    train_rbf_from(trace, cell, soc0, cfg, seed)
}
