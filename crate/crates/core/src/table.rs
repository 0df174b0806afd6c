//! Relative-MSE tables shared by the Monte Carlo sweep and the theoretical
//! risk curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One grid row: relative MSE of each estimator against the unrestricted
/// fit at a given deviation. Columns are present only for the estimators a
/// run was asked to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub restricted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub positive_stein: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pretest: Option<f64>,
}

/// A table of relative MSE values over a deviation grid.
///
/// `replications` and `seed` are set for Monte Carlo tables and absent for
/// closed-form risk curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseTable {
    pub rows: Vec<RmseRow>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

impl RmseTable {
    /// Checks the structural invariants: strictly increasing deltas and
    /// strictly positive RMSE values.
    pub fn validate(&self) -> Result<()> {
        let mut prev = f64::NEG_INFINITY;
        for row in &self.rows {
            if !(row.delta > prev) {
                return Err(Error::InvalidConfig(format!(
                    "delta grid must be strictly increasing (at {})",
                    row.delta
                )));
            }
            prev = row.delta;
            for v in [row.restricted, row.positive_stein, row.pretest]
                .into_iter()
                .flatten()
            {
                if !(v > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "RMSE values must be positive, got {v} at delta {}",
                        row.delta
                    )));
                }
            }
        }
        Ok(())
    }
}
