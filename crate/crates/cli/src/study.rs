//! Finite-statistics study on a squeezed vacuum: how many repetitions per
//! setting are needed before `Z̄ + kΔZ̄ < 1`, for nested random setting
//! sequences of several lengths.

use gausteer_core::homodyne::{expected_variances, measurement_matrices, tomography_directions};
use gausteer_core::sdp::SdpSettings;
use gausteer_core::states::squeezed_vacuum_cm;
use gausteer_core::stats::{
    error_propagation, log_grid, representative_sequence, resimulated_spread, scan_repetition_threshold,
    svs_squeezing_for_value, RepresentativeSequence, ThresholdScan,
};
use gausteer_core::witness::{solve_witness, WitnessProblem};
use gausteer_core::{Partition, Tolerances};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    /// Full-tomography witness value fixing the squeezing.
    pub target_value: f64,
    pub prefixes: Vec<usize>,
    pub candidates: usize,
    pub replicates: usize,
    pub k_sigma: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub resimulations: usize,
    pub resimulation_repetitions: usize,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            target_value: 0.7477,
            prefixes: vec![7, 8, 9],
            candidates: 200,
            replicates: 21,
            k_sigma: 3.0,
            n_min: 100,
            n_max: 1_000_000,
            resimulations: 10_000,
            resimulation_repetitions: 1_000,
            seed: 2,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_value > 0.0 && self.target_value < 1.0) {
            return Err(CliError::Config("target value must lie in (0, 1)".into()));
        }
        if self.prefixes.is_empty() || self.prefixes.iter().any(|&k| k < 2) {
            return Err(CliError::Config("prefix lengths must be at least 2".into()));
        }
        if self.candidates == 0 || self.replicates == 0 {
            return Err(CliError::Config("candidates and replicates must be positive".into()));
        }
        if self.n_min < 2 || self.n_min > self.n_max {
            return Err(CliError::Config("need 2 ≤ n_min ≤ n_max".into()));
        }
        if self.resimulations < 2 || self.resimulation_repetitions < 2 {
            return Err(CliError::Config("resimulation counts must be at least 2".into()));
        }
        Ok(())
    }
}

/// Analytic `ΔZ̄` against the spread of `Z̄` over fresh datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadCheck {
    pub settings: usize,
    pub repetitions: usize,
    pub analytic: f64,
    pub empirical: f64,
    pub relative_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub squeezing: f64,
    pub tomography_value: f64,
    pub sequence: Option<RepresentativeSequence>,
    pub scans: Vec<ThresholdScan>,
    pub spread_checks: Vec<SpreadCheck>,
}

impl StudyReport {
    pub fn threshold(&self, settings: usize) -> Option<usize> {
        self.scans.iter().find(|s| s.settings == settings).and_then(|s| s.threshold)
    }
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn spread_check(
    c: &[f64],
    m: &[f64],
    n: usize,
    reps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SpreadCheck> {
    let analytic = error_propagation(c, m, n)?.delta_z;
    let (_, empirical) = resimulated_spread(c, m, n, reps, rng)?;
    Ok(SpreadCheck {
        settings: c.len(),
        repetitions: n,
        analytic,
        empirical,
        relative_deviation: (empirical - analytic).abs() / analytic,
    })
}

pub fn run_study(config: &StudyConfig, solver: &SdpSettings, tol: &Tolerances) -> Result<StudyReport> {
    config.validate()?;
    let part = Partition::new(1, 1)?;
    let r = svs_squeezing_for_value(config.target_value, solver, tol)?;
    let gamma = squeezed_vacuum_cm(r)?;

    let mats = measurement_matrices(&tomography_directions(2)?, 2)?;
    let m = expected_variances(&mats, &gamma)?;
    let full = solve_witness(&WitnessProblem::new(mats, m.clone(), part)?, solver, tol)?;
    if !full.is_optimal() {
        return Err(gausteer_core::Error::SolverFailure("tomography witness".into()).into());
    }

    let mut spread_checks = Vec::new();
    let mut rng = stream(config.seed, 0);
    spread_checks.push(spread_check(
        &full.coefficients,
        &m,
        config.resimulation_repetitions,
        config.resimulations,
        &mut rng,
    )?);

    let mut rng = stream(config.seed, 1);
    let sequence = representative_sequence(
        &gamma,
        &part,
        &config.prefixes,
        config.candidates,
        config.k_sigma,
        solver,
        tol,
        &mut rng,
    )?;

    let mut scans = Vec::new();
    if let Some(seq) = &sequence {
        let grid = log_grid(config.n_min, config.n_max);
        let dir_mats = measurement_matrices(&seq.directions, 2)?;
        let dir_m = expected_variances(&dir_mats, &gamma)?;
        for (i, prefix) in seq.prefixes.iter().enumerate() {
            let mut rng = stream(config.seed, 2 + i as u64);
            scans.push(scan_repetition_threshold(
                &gamma,
                &part,
                &seq.directions[..prefix.settings],
                &grid,
                config.replicates,
                config.k_sigma,
                solver,
                tol,
                &mut rng,
            )?);
            let mut rng = stream(config.seed, 100 + i as u64);
            spread_checks.push(spread_check(
                &prefix.coefficients,
                &dir_m[..prefix.settings],
                config.resimulation_repetitions,
                config.resimulations,
                &mut rng,
            )?);
        }
    }

    Ok(StudyReport {
        config: config.clone(),
        squeezing: r,
        tomography_value: full.value,
        sequence,
        scans,
        spread_checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_study_is_reproducible() {
        let config = StudyConfig {
            prefixes: vec![8],
            candidates: 10,
            replicates: 3,
            n_min: 1_000,
            n_max: 100_000,
            resimulations: 500,
            ..StudyConfig::default()
        };
        let (s, t) = (SdpSettings::default(), Tolerances::default());
        let a = run_study(&config, &s, &t).unwrap();
        assert!((a.tomography_value - 0.7477).abs() < 1e-4);
        assert_eq!(a.spread_checks[0].settings, 10);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&run_study(&config, &s, &t).unwrap()).unwrap());
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = StudyConfig { prefixes: vec![1], ..StudyConfig::default() };
        assert!(bad.validate().is_err());
        let bad = StudyConfig { target_value: 1.5, ..StudyConfig::default() };
        assert!(bad.validate().is_err());
    }
}
