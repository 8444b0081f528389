//! Current-magnitude scheduled filter-state parameters.
//!
//! A schedule holds one [`FilterStateParams`] per current-magnitude bin and
//! selects by `|i|` at every sample. The state vector is shared across bins;
//! only the coefficients switch.

use serde::{Deserialize, Serialize};

use crate::cell::CellParams;
use crate::error::{Error, Result};
use crate::models::filter_state::FilterStateParams;

/// One schedule entry: parameters active while `|i|` is below `upper_a` (and
/// at or above the previous bin's bound).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledBin {
    /// Exclusive upper bound on `|i|` in amps; the last bin must be infinite.
    pub upper_a: f64,
    pub params: FilterStateParams,
}

/// Piecewise parameter set over current magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledParams {
    pub bins: Vec<ScheduledBin>,
}

impl ScheduledParams {
    /// Default bin edges for a cell: `[0, 1.5C)`, `[1.5C, 3C)`, `[3C, inf)`.
    pub fn default_edges(cell: &CellParams) -> Vec<f64> {
        let c = cell.c_rate_amps();
        vec![1.5 * c, 3.0 * c, f64::INFINITY]
    }

    /// Builds a schedule from ascending exclusive upper bounds and matching
    /// parameter sets.
    pub fn new(edges: Vec<f64>, params: Vec<FilterStateParams>) -> Result<Self> {
        if edges.is_empty() || edges.len() != params.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} edges for {} parameter sets",
                edges.len(),
                params.len()
            )));
        }
        let bins = edges
            .into_iter()
            .zip(params)
            .map(|(upper_a, params)| ScheduledBin { upper_a, params })
            .collect();
        let s = ScheduledParams { bins };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins.is_empty() {
            return Err(Error::InvalidParams("schedule has no bins".into()));
        }
        let mut prev = 0.0;
        for (j, b) in self.bins.iter().enumerate() {
            if !(b.upper_a > prev) {
                return Err(Error::InvalidParams(format!(
                    "bin {j} upper bound {} not above previous bound {prev}",
                    b.upper_a
                )));
            }
            prev = b.upper_a;
            b.params.validate()?;
        }
        if self.bins.last().unwrap().upper_a != f64::INFINITY {
            return Err(Error::InvalidParams(
                "last bin upper bound must be infinite".into(),
            ));
        }
        Ok(())
    }

    /// Index of the bin covering the given current.
    pub fn bin_index(&self, i: f64) -> usize {
        let mag = i.abs();
        self.bins
            .iter()
            .position(|b| mag < b.upper_a)
            .unwrap_or(self.bins.len() - 1)
    }

    /// Parameters active for the given current.
    pub fn select(&self, i: f64) -> &FilterStateParams {
        &self.bins[self.bin_index(i)].params
    }

    /// Bin bounds as `(lo, hi)` pairs in amps.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut lo = 0.0;
        self.bins
            .iter()
            .map(|b| {
                let pair = (lo, b.upper_a);
                lo = b.upper_a;
                pair
            })
            .collect()
    }
}
