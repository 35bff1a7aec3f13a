//! Numerical thresholds shared by every module.
//!
//! Semidefiniteness checks accept eigenvalues down to `-psd_floor`; strict
//! positivity requires eigenvalues above `strict_positive`.

use serde::{Deserialize, Serialize};

/// One record of all configurable tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Floor for `A ⪰ 0` checks.
    pub psd_floor: f64,
    /// Minimum eigenvalue for `A ≻ 0` checks.
    pub strict_positive: f64,
    /// Largest entrywise asymmetry accepted (and then removed) on construction.
    pub symmetry: f64,
    /// Relative agreement required between paired symplectic eigenvalues.
    pub pair_agreement: f64,
    /// A Schur symplectic eigenvalue at or above `1 - steering` is non-steerable.
    pub steering: f64,
    /// Witness values below `1 - detection` certify steering.
    pub detection: f64,
    /// Floor for `Z ⪰ 0` when validating a witness.
    pub witness_psd: f64,
    /// Slack on `str[Z_B] ≥ 1/2` when validating a witness.
    pub witness_str: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            psd_floor: 1e-9,
            strict_positive: 1e-10,
            symmetry: 1e-9,
            pair_agreement: 1e-8,
            steering: 1e-9,
            detection: 1e-7,
            witness_psd: 1e-8,
            witness_str: 1e-7,
        }
    }
}
