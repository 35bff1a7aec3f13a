//! Monte Carlo sweeps: draw steerable states from a family, run the
//! detection loop with exact variances and histogram the number of settings
//! needed against the steering measure.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::{CovarianceMatrix, Partition};
use crate::sdp::SdpSettings;
use crate::states::{ghz_cm, random_cm, squeezed_vacuum_cm, GhzParams, RandomCmConfig};
use crate::steering::steering_verdict;
use crate::tolerance::Tolerances;
use crate::witness::{default_max_settings, detect_steering, DetectionConfig, WitnessCandidate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepFamily {
    /// Two-mode squeezed vacuum, `r ~ U[0, r_max]`.
    Svs,
    /// Random two-mode states `S γ_th Sᵀ`.
    Random2,
    /// Three-mode GHZ-type states, `a` uniform on an integer grid, Alice
    /// holding the first mode.
    Ghz3,
}

impl SweepFamily {
    pub fn modes(&self) -> usize {
        match self {
            Self::Svs | Self::Random2 => 2,
            Self::Ghz3 => 3,
        }
    }

    pub fn partition(&self) -> Partition {
        match self {
            Self::Svs | Self::Random2 => Partition { n_alice: 1, n_bob: 1 },
            Self::Ghz3 => Partition { n_alice: 1, n_bob: 2 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinSpec {
    /// Equal-width bins over the observed measure range.
    Uniform(usize),
    /// Explicit strictly increasing edges.
    Edges(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub family: SweepFamily,
    pub samples: usize,
    pub seed: u64,
    pub r_max: f64,
    pub nu_max: f64,
    pub ghz_a_min: u32,
    pub ghz_a_max: u32,
    pub bins: BinSpec,
    pub max_settings: usize,
    /// Draws allowed per sample while looking for a steerable state.
    pub max_draws: usize,
    #[serde(default)]
    pub solver: SdpSettings,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl SweepConfig {
    pub fn new(family: SweepFamily, samples: usize, seed: u64) -> Self {
        Self {
            family,
            samples,
            seed,
            r_max: 2.0,
            nu_max: 5.0,
            ghz_a_min: 2,
            ghz_a_max: 26,
            bins: BinSpec::Uniform(10),
            max_settings: default_max_settings(family.modes()),
            max_draws: 10_000,
            solver: SdpSettings::default(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(invalid("samples", "must be at least 1"));
        }
        if !(self.r_max >= 0.0 && self.r_max.is_finite()) {
            return Err(invalid("r_max", "must be finite and ≥ 0"));
        }
        if !(self.nu_max >= 1.0 && self.nu_max.is_finite()) {
            return Err(invalid("nu_max", "must be finite and ≥ 1"));
        }
        if self.ghz_a_min < 1 || self.ghz_a_min > self.ghz_a_max {
            return Err(invalid("ghz grid", "need 1 ≤ a_min ≤ a_max"));
        }
        match &self.bins {
            BinSpec::Uniform(0) => return Err(invalid("bins", "need at least one bin")),
            BinSpec::Edges(e) if e.len() < 2 || e.windows(2).any(|w| !(w[0] < w[1])) => {
                return Err(invalid("bins", "edges must be strictly increasing"))
            }
            _ => {}
        }
        if self.max_settings < 2 {
            return Err(invalid("max_settings", "must be at least 2"));
        }
        if self.max_draws == 0 {
            return Err(invalid("max_draws", "must be positive"));
        }
        Ok(())
    }
}

/// Outcome of one sweep sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub index: usize,
    /// Squeezing `r` or GHZ parameter `a`; absent for random states.
    pub parameter: Option<f64>,
    pub measure: f64,
    /// `None` when the budget ran out without detection.
    pub settings_used: Option<usize>,
    /// Set when the solver failed twice; excluded from the histogram.
    pub solver_failure: bool,
}

/// Independent stream for sample `index`, the same whatever the worker
/// layout.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn draw_state<R: Rng + ?Sized>(config: &SweepConfig, rng: &mut R) -> Result<(CovarianceMatrix, Option<f64>)> {
    match config.family {
        SweepFamily::Svs => {
            let r = rng.random::<f64>() * config.r_max;
            Ok((squeezed_vacuum_cm(r)?, Some(r)))
        }
        SweepFamily::Random2 => {
            let cfg = RandomCmConfig { n_modes: 2, nu_max: config.nu_max, r_max: config.r_max, seed: config.seed };
            Ok((random_cm(&cfg, rng)?, None))
        }
        SweepFamily::Ghz3 => {
            let a = rng.random_range(config.ghz_a_min..=config.ghz_a_max) as f64;
            Ok((ghz_cm(&GhzParams::new(a)?)?, Some(a)))
        }
    }
}

/// Draws until the state is steerable, then runs the detection loop.
pub fn run_sample(config: &SweepConfig, index: usize) -> Result<SampleOutcome> {
    Ok(run_sample_with_witness(config, index)?.0)
}

/// [`run_sample`] together with the final witness of the detection loop.
pub fn run_sample_with_witness(
    config: &SweepConfig,
    index: usize,
) -> Result<(SampleOutcome, Option<WitnessCandidate>)> {
    let mut rng = sample_rng(config.seed, index);
    let part = config.family.partition();
    let detection = DetectionConfig {
        solver: config.solver,
        tolerances: config.tolerances,
        ..DetectionConfig::exact(config.max_settings)
    };
    for _ in 0..config.max_draws {
        let (gamma, parameter) = draw_state(config, &mut rng)?;
        let verdict = steering_verdict(&gamma, &part)?;
        if !verdict.steerable {
            continue;
        }
        let mut outcome = SampleOutcome {
            index,
            parameter,
            measure: verdict.measure,
            settings_used: None,
            solver_failure: false,
        };
        return match detect_steering(&gamma, &part, &detection, &mut rng) {
            Ok(rec) => {
                outcome.settings_used = rec.detected.then_some(rec.settings_used);
                Ok((outcome, rec.witness))
            }
            Err(Error::SolverFailure(_)) => {
                outcome.solver_failure = true;
                Ok((outcome, None))
            }
            Err(e) => Err(e),
        };
    }
    Err(invalid("family", "no steerable state within the draw budget"))
}

/// Histogram of settings used per measure bin. Column `0` of the settings
/// axis collects samples that were never detected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub bin_edges: Vec<f64>,
    /// Settings counts heading the histogram columns, ascending; `0` means
    /// undetected.
    pub settings_axis: Vec<usize>,
    /// `counts[bin][column]`.
    pub counts: Vec<Vec<u64>>,
    /// Counts divided by their bin total, so each populated bin sums to one.
    pub fractions: Vec<Vec<f64>>,
    pub solver_failures: usize,
    /// Sample indices that failed, for reruns.
    pub failed_samples: Vec<usize>,
}

impl SweepResult {
    pub fn total_count(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Column index of a settings count.
    pub fn column(&self, settings: usize) -> Option<usize> {
        self.settings_axis.iter().position(|&s| s == settings)
    }

    /// Most frequent settings count over detected samples.
    pub fn modal_settings(&self) -> Option<usize> {
        let mut best: Option<(usize, u64)> = None;
        for (col, &s) in self.settings_axis.iter().enumerate() {
            if s == 0 {
                continue;
            }
            let total: u64 = self.counts.iter().map(|row| row[col]).sum();
            if total > 0 && best.is_none_or(|(_, t)| total > t) {
                best = Some((s, total));
            }
        }
        best.map(|(s, _)| s)
    }

    /// Detected or not, the fraction of samples whose settings count exceeds
    /// `limit` (undetected samples count as exceeding it).
    pub fn fraction_above(&self, limit: usize) -> f64 {
        let total = self.total_count();
        if total == 0 {
            return 0.0;
        }
        let above: u64 = self
            .settings_axis
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 0 || s > limit)
            .map(|(col, _)| self.counts.iter().map(|row| row[col]).sum::<u64>())
            .sum();
        above as f64 / total as f64
    }
}

fn bin_edges(spec: &BinSpec, measures: &[f64]) -> Vec<f64> {
    match spec {
        BinSpec::Edges(e) => e.clone(),
        BinSpec::Uniform(count) => {
            let lo = measures.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = measures.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                return Vec::new();
            }
            let hi = if hi > lo { hi } else { lo + 1.0 };
            (0..=*count).map(|i| lo + (hi - lo) * i as f64 / *count as f64).collect()
        }
    }
}

fn bin_of(edges: &[f64], v: f64) -> Option<usize> {
    let bins = edges.len().checked_sub(1)?;
    if bins == 0 || v < edges[0] || v > edges[bins] {
        return None;
    }
    let idx = edges.partition_point(|&e| e <= v).saturating_sub(1);
    Some(idx.min(bins - 1))
}

/// Builds the histogram from per-sample outcomes (in any order).
pub fn assemble(config: &SweepConfig, outcomes: &[SampleOutcome]) -> SweepResult {
    let mut outcomes: Vec<&SampleOutcome> = outcomes.iter().collect();
    outcomes.sort_by_key(|o| o.index);
    let kept: Vec<&SampleOutcome> = outcomes.iter().copied().filter(|o| !o.solver_failure).collect();
    let failed_samples: Vec<usize> = outcomes.iter().filter(|o| o.solver_failure).map(|o| o.index).collect();
    let measures: Vec<f64> = kept.iter().map(|o| o.measure).collect();
    let edges = bin_edges(&config.bins, &measures);
    let settings_axis: Vec<usize> =
        core::iter::once(0).chain(2..=config.max_settings).collect();
    let bins = edges.len().saturating_sub(1);
    let mut counts = alloc::vec![alloc::vec![0u64; settings_axis.len()]; bins];
    for o in &kept {
        let (Some(b), col) = (bin_of(&edges, o.measure), o.settings_used.unwrap_or(0)) else {
            continue;
        };
        if let Some(c) = settings_axis.iter().position(|&s| s == col) {
            counts[b][c] += 1;
        }
    }
    let fractions = counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            row.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }).collect()
        })
        .collect();
    SweepResult {
        config: config.clone(),
        bin_edges: edges,
        settings_axis,
        counts,
        fractions,
        solver_failures: failed_samples.len(),
        failed_samples,
    }
}

/// Sequential sweep over all samples.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let outcomes = (0..config.samples).map(|i| run_sample(config, i)).collect::<Result<Vec<_>>>()?;
    Ok(assemble(config, &outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_svs_sweep_conserves_samples() {
        let config = SweepConfig::new(SweepFamily::Svs, 30, 4);
        let result = run_sweep(&config).unwrap();
        assert_eq!(result.total_count() as usize, 30 - result.solver_failures);
        for row in &result.fractions {
            let s: f64 = row.iter().sum();
            assert!(s == 0.0 || (s - 1.0).abs() < 1e-12);
        }
        assert_eq!(result, run_sweep(&config).unwrap());
    }

    #[test]
    fn samples_do_not_depend_on_order() {
        let config = SweepConfig::new(SweepFamily::Random2, 6, 9);
        let forward: Vec<_> = (0..6).map(|i| run_sample(&config, i).unwrap()).collect();
        let backward: Vec<_> = (0..6).rev().map(|i| run_sample(&config, i).unwrap()).collect();
        assert_eq!(assemble(&config, &forward), assemble(&config, &backward));
    }

    #[test]
    fn binning() {
        let edges = [0.0, 1.0, 2.0];
        assert_eq!(bin_of(&edges, 0.0), Some(0));
        assert_eq!(bin_of(&edges, 1.0), Some(1));
        assert_eq!(bin_of(&edges, 2.0), Some(1));
        assert_eq!(bin_of(&edges, 2.5), None);
        let config = SweepConfig::new(SweepFamily::Svs, 1, 0);
        let empty = assemble(&config, &[]);
        assert_eq!(empty.total_count(), 0);
        assert!(empty.counts.is_empty());
    }

    #[test]
    fn invalid_configs() {
        let mut c = SweepConfig::new(SweepFamily::Ghz3, 0, 0);
        assert!(c.validate().is_err());
        c.samples = 1;
        c.bins = BinSpec::Edges(alloc::vec![1.0, 1.0]);
        assert!(c.validate().is_err());
        c.bins = BinSpec::Uniform(3);
        c.ghz_a_min = 30;
        assert!(c.validate().is_err());
    }
}
