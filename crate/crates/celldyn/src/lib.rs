//! Discrete-time modeling of lithium-ion polymer cells, parameter
//! identification, and closed-loop state-of-charge estimation.
//!
//! The crate is organized around a single data path:
//!
//! 1. [`plant`] synthesizes realistic current/voltage traces (pulsed
//!    characterization suites and seeded drive cycles) from a configurable
//!    ground-truth model, optionally passed through a sensor model with
//!    noise, bias, and ADC quantization.
//! 2. [`ident`] fits model parameters to a trace: linear least squares for
//!    the static combined model, an extended Kalman weight estimator for the
//!    dynamic filter-state model and the RBF network, and a current-scheduled
//!    variant.
//! 3. [`models`] evaluates any fitted model over a trace.
//! 4. [`estimate`] runs the closed-loop state-of-charge estimator over a
//!    measured trace using a fitted dynamic model.
//!
//! [`cell`] carries the shared capacity/efficiency bookkeeping and [`trace`]
//! the measurement-log type those stages exchange. [`io`] reads and writes
//! the on-disk CSV and JSON formats, and [`metrics`] summarizes prediction
//! error.
//!
//! Sign convention throughout: positive current discharges the cell.

pub mod cell;
pub mod error;
pub mod estimate;
pub mod ident;
pub mod io;
pub mod metrics;
pub mod models;
pub mod plant;
pub mod trace;

pub use cell::{coulombic_efficiency, peukert_current, soc_step, soc_trajectory};
pub use cell::{CellParams, Soc, SocUpdate};
pub use error::{Error, Result};
pub use trace::{Sample, Trace};
