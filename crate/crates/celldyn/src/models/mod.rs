//! Cell voltage models and the shared simulation loop.
//!
//! Four families are supported:
//!
//! * `combined` - static combined model (with the four classical single-state
//!   variants as special cases),
//! * `filter_state` - four-state dynamic model,
//! * `rbf` - Gaussian radial basis function network,
//! * `scheduled` - filter-state parameters switched by current magnitude.
//!
//! [`simulate`] replays a model over a trace of currents and returns the
//! predicted terminal voltage per sample. The output at sample `k` is
//! computed from the state reached before sample `k`'s current acts, then the
//! state advances; every family follows the same ordering.

pub mod combined;
pub mod filter_state;
pub mod rbf;
pub mod scheduled;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::cell::{soc_step, CellParams, Soc};
use crate::error::{Error, Result};
use crate::trace::Trace;

pub use combined::{
    combined_ocv, combined_output, modified_nernst_output, nernst_output, shepherd_output,
    unnewehr_output, CombinedParams,
};
pub use filter_state::{
    drive_vector, filter_state_output, filter_state_step, state_matrix, FilterStateParams,
};
pub use rbf::{default_layout, rbf_output, RbfInput, RbfParams, SIGMA_MIN};
pub use scheduled::{ScheduledBin, ScheduledParams};

/// Band the static models are evaluated in: soc is clamped here before the
/// combined model's reciprocal and logarithmic terms are formed, so a resting
/// full or empty cell stays evaluable.
pub const SOC_EVAL_LO: f64 = 1e-4;
/// Upper edge of the evaluation band, see [`SOC_EVAL_LO`].
pub const SOC_EVAL_HI: f64 = 1.0 - 1e-4;

/// One model of any family, tagged for serialization as
/// `{"family": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum ModelParams {
    Combined(CombinedParams),
    FilterState(FilterStateParams),
    Rbf(RbfParams),
    Scheduled(ScheduledParams),
}

impl ModelParams {
    pub fn family(&self) -> &'static str {
        match self {
            ModelParams::Combined(_) => "combined",
            ModelParams::FilterState(_) => "filter_state",
            ModelParams::Rbf(_) => "rbf",
            ModelParams::Scheduled(_) => "scheduled",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::Combined(p) => p.validate(),
            ModelParams::FilterState(p) => p.validate(),
            ModelParams::Rbf(p) => p.validate(),
            ModelParams::Scheduled(p) => p.validate(),
        }
    }
}

/// Initial conditions for [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimInit {
    /// State of charge before the first sample acts.
    pub soc0: f64,
    /// Initial internal filter states `x2, x3, x4`; zero for a cell that has
    /// rested long enough for the current filters to die out.
    pub filter0: [f64; 3],
    /// Seed for the fed-back previous-voltage input of the RBF family.
    /// `None` uses the trace's first measured voltage.
    pub y_prev0: Option<f64>,
    /// Current one sample before the trace starts; zero when starting from
    /// rest.
    pub i_prev0: f64,
}

impl SimInit {
    pub fn at_soc(soc0: f64) -> Self {
        SimInit {
            soc0,
            filter0: [0.0; 3],
            y_prev0: None,
            i_prev0: 0.0,
        }
    }
}

fn clamp_soc_for_eval(soc: f64) -> f64 {
    soc.clamp(SOC_EVAL_LO, SOC_EVAL_HI)
}

fn at_sample(index: usize, e: Error) -> Error {
    match e {
        Error::Domain { reason, .. } => Error::Domain { index, reason },
        Error::SocOutOfRange { value, op } => Error::Domain {
            index,
            reason: format!("soc {value} out of range in {op}"),
        },
        other => other,
    }
}

/// Replays `model` over the trace currents and returns one predicted voltage
/// per sample.
///
/// The trace's voltage column is ignored except as the feedback seed for the
/// RBF family's first sample. Domain failures carry the offending sample
/// index.
pub fn simulate(
    model: &ModelParams,
    trace: &Trace,
    cell: &CellParams,
    init: &SimInit,
) -> Result<Vec<f64>> {
    cell.validate()?;
    model.validate()?;
    trace.check_period(cell.sample_period_h)?;
    if !(0.0..=1.0).contains(&init.soc0) {
        return Err(Error::SocOutOfRange {
            value: init.soc0,
            op: "simulate",
        });
    }
    let n = trace.len();
    let mut out = Vec::with_capacity(n);
    match model {
        ModelParams::Combined(p) => {
            let mut soc = Soc(init.soc0);
            for (k, s) in trace.samples().iter().enumerate() {
                let y = combined_output(clamp_soc_for_eval(soc.0), s.current_a, p)
                    .map_err(|e| at_sample(k, e))?;
                out.push(y);
                soc = soc_step(soc, s.current_a, cell).soc;
            }
        }
        ModelParams::FilterState(p) => {
            let mut x = Vector4::new(init.soc0, init.filter0[0], init.filter0[1], init.filter0[2]);
            for (k, s) in trace.samples().iter().enumerate() {
                let y = filter_state_output(&x, s.current_a, p, cell)
                    .map_err(|e| at_sample(k, e))?;
                out.push(y);
                x = filter_state_step(&x, s.current_a, p, cell);
            }
        }
        ModelParams::Scheduled(p) => {
            let mut x = Vector4::new(init.soc0, init.filter0[0], init.filter0[1], init.filter0[2]);
            for (k, s) in trace.samples().iter().enumerate() {
                let active = p.select(s.current_a);
                let y = filter_state_output(&x, s.current_a, active, cell)
                    .map_err(|e| at_sample(k, e))?;
                out.push(y);
                x = filter_state_step(&x, s.current_a, active, cell);
            }
        }
        ModelParams::Rbf(p) => {
            let mut soc = Soc(init.soc0);
            let mut y_prev = init
                .y_prev0
                .unwrap_or_else(|| trace.samples()[0].voltage_v);
            let mut i_prev = init.i_prev0;
            let mut raw = vec![0.0; p.input_layout.len()];
            for (k, s) in trace.samples().iter().enumerate() {
                for (slot, which) in raw.iter_mut().zip(&p.input_layout) {
                    *slot = match which {
                        RbfInput::PrevVoltage => y_prev,
                        RbfInput::Soc => soc.0,
                        RbfInput::Current => s.current_a,
                        RbfInput::PrevCurrent => i_prev,
                    };
                }
                let y = rbf_output(p, &raw).map_err(|e| at_sample(k, e))?;
                out.push(y);
                y_prev = y;
                i_prev = s.current_a;
                soc = soc_step(soc, s.current_a, cell).soc;
            }
        }
    }
    Ok(out)
}
