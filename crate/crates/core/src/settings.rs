//! Solver tolerances shared by every stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute root tolerance on positions.
    pub tol_root: f64,
    /// Stationarity residual `|ρ1 − ρ2|` at walls, relative to `max(1, ρ)`.
    pub tol_stat: f64,
    /// Relative normalization error.
    pub tol_norm: f64,
    /// Relative energy gap below which candidates are degenerate.
    pub tol_energy: f64,
    /// Allowed discrepancy against the brute-force oracle.
    pub tol_oracle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_root: 1e-12,
            tol_stat: 1e-10,
            tol_norm: 1e-10,
            tol_energy: 1e-9,
            tol_oracle: 1e-4,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tol_root", self.tol_root),
            ("tol_stat", self.tol_stat),
            ("tol_norm", self.tol_norm),
            ("tol_energy", self.tol_energy),
            ("tol_oracle", self.tol_oracle),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}
