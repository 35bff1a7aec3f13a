//! Finite-statistics evaluation of witnesses: error propagation for
//! `Z̄ = c·m̂`, the two-dataset protocol and repetition-threshold search.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::{CovarianceMatrix, Partition};
use crate::homodyne::{
    draw_sample_variance, expected_variances, measurement_matrices, random_direction, tomography_directions,
    MeasurementDirection,
};
use crate::sdp::SdpSettings;
use crate::states::squeezed_vacuum_cm;
use crate::tolerance::Tolerances;
use crate::witness::{solve_witness, solve_witness_with_retry, WitnessCandidate, WitnessProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub z_bar: f64,
    /// One standard deviation of `Z̄`.
    pub delta_z: f64,
    pub repetitions: usize,
    pub settings: usize,
}

impl ErrorEstimate {
    /// `Z̄ + k·ΔZ̄ < 1`.
    pub fn detects(&self, k_sigma: f64) -> bool {
        self.z_bar + k_sigma * self.delta_z < 1.0
    }
}

/// `Z̄ = c·m` and `ΔZ̄ = √(2/(n−1)) √(Σ cᵢ² mᵢ²)`.
pub fn error_propagation(c: &[f64], m: &[f64], repetitions: usize) -> Result<ErrorEstimate> {
    if repetitions < 2 {
        return Err(invalid("repetitions", "need at least 2 samples"));
    }
    if c.len() != m.len() {
        return Err(Error::DimensionMismatch { expected: c.len(), found: m.len() });
    }
    let z_bar = c.iter().zip(m).map(|(a, b)| a * b).sum();
    let spread: f64 = c.iter().zip(m).map(|(a, b)| a * a * b * b).sum();
    Ok(ErrorEstimate {
        z_bar,
        delta_z: libm::sqrt(2.0 / (repetitions - 1) as f64) * libm::sqrt(spread),
        repetitions,
        settings: c.len(),
    })
}

/// Repetitions at which the expected `Z̄ + k·ΔZ̄` reaches one for a witness
/// with exact value `w < 1` and spread `Σ cᵢ² mᵢ²`.
pub fn predicted_threshold(c: &[f64], m: &[f64], k_sigma: f64) -> Option<f64> {
    let w: f64 = c.iter().zip(m).map(|(a, b)| a * b).sum();
    if !(w < 1.0) {
        return None;
    }
    let spread: f64 = c.iter().zip(m).map(|(a, b)| a * a * b * b).sum();
    Some(1.0 + 2.0 * k_sigma * k_sigma * spread / ((1.0 - w) * (1.0 - w)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoDatasetOutcome {
    pub estimate: ErrorEstimate,
    pub detected: bool,
    pub witness: WitnessCandidate,
}

/// Witness coefficients from one simulated dataset, `Z̄ ± ΔZ̄` from a
/// second, independent one. `None` when the first dataset yields no
/// optimal witness.
#[allow(clippy::too_many_arguments)]
pub fn two_dataset_estimate<R: Rng + ?Sized>(
    gamma: &CovarianceMatrix,
    part: &Partition,
    directions: &[MeasurementDirection],
    repetitions: usize,
    k_sigma: f64,
    settings: &SdpSettings,
    tol: &Tolerances,
    rng: &mut R,
) -> Result<Option<TwoDatasetOutcome>> {
    if repetitions < 2 {
        return Err(invalid("repetitions", "need at least 2 samples"));
    }
    let mats = measurement_matrices(directions, gamma.modes())?;
    let exact = expected_variances(&mats, gamma)?;
    let first = exact
        .iter()
        .map(|&m| draw_sample_variance(m, repetitions, rng))
        .collect::<Result<Vec<_>>>()?;
    let second = exact
        .iter()
        .map(|&m| draw_sample_variance(m, repetitions, rng))
        .collect::<Result<Vec<_>>>()?;
    let (witness, _) = solve_witness_with_retry(&WitnessProblem::new(mats, first, *part)?, settings, tol)?;
    if !witness.is_optimal() {
        return Ok(None);
    }
    let estimate = error_propagation(&witness.coefficients, &second, repetitions)?;
    Ok(Some(TwoDatasetOutcome { detected: estimate.detects(k_sigma), estimate, witness }))
}

/// Optimal witness value over full two-mode tomography of a squeezed vacuum.
pub fn svs_tomography_value(r: f64, settings: &SdpSettings, tol: &Tolerances) -> Result<f64> {
    let gamma = squeezed_vacuum_cm(r)?;
    let part = Partition::new(1, 1)?;
    let mats = measurement_matrices(&tomography_directions(2)?, 2)?;
    let vars = expected_variances(&mats, &gamma)?;
    let w = solve_witness(&WitnessProblem::new(mats, vars, part)?, settings, tol)?;
    if !w.is_optimal() {
        return Err(Error::SolverFailure(alloc::format!("tomography witness status {:?}", w.status)));
    }
    Ok(w.value)
}

/// Squeezing whose full-tomography witness value equals `target`, by
/// bisection on the solver output (the value decreases with `r`).
pub fn svs_squeezing_for_value(target: f64, settings: &SdpSettings, tol: &Tolerances) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(invalid("target", "witness value must lie in (0, 1)"));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while svs_tomography_value(hi, settings, tol)? > target {
        hi *= 2.0;
        if hi > 64.0 {
            return Err(invalid("target", "not reachable"));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if svs_tomography_value(mid, settings, tol)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Median of finite values (average of the two middle ones for even counts).
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Mean and unbiased standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub repetitions: usize,
    /// Median of `Z̄ + k·ΔZ̄` over replicates; infinite when no replicate
    /// produced a witness.
    pub median_bound: f64,
    pub median_z_bar: f64,
    pub median_delta_z: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScan {
    pub settings: usize,
    pub points: Vec<ThresholdPoint>,
    /// Smallest scanned `n` whose median bound lies below one.
    pub threshold: Option<usize>,
}

/// Runs the two-dataset protocol `replicates` times at each repetition count
/// and reports where the median `Z̄ + k·ΔZ̄` first drops below one.
#[allow(clippy::too_many_arguments)]
pub fn scan_repetition_threshold<R: Rng + ?Sized>(
    gamma: &CovarianceMatrix,
    part: &Partition,
    directions: &[MeasurementDirection],
    grid: &[usize],
    replicates: usize,
    k_sigma: f64,
    settings: &SdpSettings,
    tol: &Tolerances,
    rng: &mut R,
) -> Result<ThresholdScan> {
    if replicates == 0 {
        return Err(invalid("replicates", "must be positive"));
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut threshold = None;
    for &n in grid {
        let (mut bounds, mut zs, mut dzs) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..replicates {
            match two_dataset_estimate(gamma, part, directions, n, k_sigma, settings, tol, rng)? {
                Some(out) => {
                    bounds.push(out.estimate.z_bar + k_sigma * out.estimate.delta_z);
                    zs.push(out.estimate.z_bar);
                    dzs.push(out.estimate.delta_z);
                }
                None => bounds.push(f64::INFINITY),
            }
        }
        // Replicates without a witness count as failures to detect.
        bounds.sort_by(f64::total_cmp);
        let mid = bounds.len() / 2;
        let median_bound = if bounds.len() % 2 == 1 { bounds[mid] } else { 0.5 * (bounds[mid - 1] + bounds[mid]) };
        if threshold.is_none() && median_bound < 1.0 {
            threshold = Some(n);
        }
        points.push(ThresholdPoint {
            repetitions: n,
            median_bound,
            median_z_bar: median(&zs).unwrap_or(f64::NAN),
            median_delta_z: median(&dzs).unwrap_or(f64::NAN),
            replicates,
        });
    }
    Ok(ThresholdScan { settings: directions.len(), points, threshold })
}

/// Roughly logarithmic grid `{1, 1.5, 2, 3, 5, 7} × 10^e` within `[lo, hi]`.
pub fn log_grid(lo: usize, hi: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut decade = 1usize;
    while decade <= hi {
        for f in [10, 15, 20, 30, 50, 70] {
            let n = decade * f / 10;
            if n >= lo && n <= hi && out.last() != Some(&n) {
                out.push(n);
            }
        }
        decade *= 10;
    }
    out
}

/// Mean and standard deviation of `Z̄ = c·m̂` over `replicates` fresh draws of
/// the sample variances.
pub fn resimulated_spread<R: Rng + ?Sized>(
    c: &[f64],
    m: &[f64],
    repetitions: usize,
    replicates: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if c.len() != m.len() {
        return Err(Error::DimensionMismatch { expected: c.len(), found: m.len() });
    }
    if replicates < 2 {
        return Err(invalid("replicates", "need at least 2"));
    }
    let mut zs = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        let mut z = 0.0;
        for (ci, &mi) in c.iter().zip(m) {
            z += ci * draw_sample_variance(mi, repetitions, rng)?;
        }
        zs.push(z);
    }
    Ok(mean_std(&zs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixWitness {
    pub settings: usize,
    /// Exact-variance optimum over the first `settings` directions.
    pub value: f64,
    pub coefficients: Vec<f64>,
    pub predicted_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeSequence {
    pub directions: Vec<MeasurementDirection>,
    pub prefixes: Vec<PrefixWitness>,
    pub drawn: usize,
    /// Candidates whose every listed prefix detects.
    pub eligible: usize,
}

/// Draws `candidates` nested random direction sequences, keeps those whose
/// every prefix length in `prefixes` detects with exact variances, and
/// returns the one whose log predicted thresholds lie closest to their
/// componentwise median.
#[allow(clippy::too_many_arguments)]
pub fn representative_sequence<R: Rng + ?Sized>(
    gamma: &CovarianceMatrix,
    part: &Partition,
    prefixes: &[usize],
    candidates: usize,
    k_sigma: f64,
    settings: &SdpSettings,
    tol: &Tolerances,
    rng: &mut R,
) -> Result<Option<RepresentativeSequence>> {
    let longest = prefixes.iter().copied().max().ok_or_else(|| invalid("prefixes", "empty"))?;
    if prefixes.iter().any(|&k| k < 2) {
        return Err(invalid("prefixes", "need at least 2 settings"));
    }
    let n_modes = gamma.modes();
    let mut eligible: Vec<(Vec<MeasurementDirection>, Vec<PrefixWitness>)> = Vec::new();
    for _ in 0..candidates {
        let dirs = (0..longest).map(|_| random_direction(n_modes, rng)).collect::<Result<Vec<_>>>()?;
        let mats = measurement_matrices(&dirs, n_modes)?;
        let m = expected_variances(&mats, gamma)?;
        let mut found = Vec::with_capacity(prefixes.len());
        for &k in prefixes {
            let problem = WitnessProblem::new(mats[..k].to_vec(), m[..k].to_vec(), *part)?;
            let (w, _) = solve_witness_with_retry(&problem, settings, tol)?;
            if !w.is_optimal() || !(w.value < 1.0 - tol.detection) {
                break;
            }
            let Some(n_star) = predicted_threshold(&w.coefficients, &m[..k], k_sigma) else {
                break;
            };
            found.push(PrefixWitness { settings: k, value: w.value, coefficients: w.coefficients, predicted_threshold: n_star });
        }
        if found.len() == prefixes.len() {
            eligible.push((dirs, found));
        }
    }
    if eligible.is_empty() {
        return Ok(None);
    }
    let centre: Vec<f64> = (0..prefixes.len())
        .map(|i| {
            let logs: Vec<f64> = eligible.iter().map(|(_, p)| libm::log10(p[i].predicted_threshold)).collect();
            median(&logs).unwrap_or(0.0)
        })
        .collect();
    let distance = |p: &[PrefixWitness]| -> f64 {
        p.iter()
            .zip(&centre)
            .map(|(w, c)| {
                let d = libm::log10(w.predicted_threshold) - c;
                d * d
            })
            .sum()
    };
    let count = eligible.len();
    let (directions, prefixes) = eligible
        .into_iter()
        .min_by(|a, b| distance(&a.1).total_cmp(&distance(&b.1)))
        .expect("non-empty");
    Ok(Some(RepresentativeSequence { directions, prefixes, drawn: candidates, eligible: count }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::random_nonsteerable_cm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn propagation_examples() {
        let e = error_propagation(&[1.0], &[1.0], 3).unwrap();
        assert!((e.delta_z - 1.0).abs() < 1e-15);
        let a = error_propagation(&[0.5, -0.2], &[2.0, 3.0], 11).unwrap();
        let b = error_propagation(&[0.5, -0.2], &[2.0, 3.0], 21).unwrap();
        assert!((a.delta_z * a.delta_z / (b.delta_z * b.delta_z) - 2.0).abs() < 1e-12);
        assert!(error_propagation(&[1.0], &[1.0], 1).is_err());
        assert!(error_propagation(&[1.0, 2.0], &[1.0], 5).is_err());
    }

    #[test]
    fn back_solved_squeezing_hits_target() {
        let (s, t) = (SdpSettings::default(), Tolerances::default());
        let r = svs_squeezing_for_value(0.7477, &s, &t).unwrap();
        assert!((svs_tomography_value(r, &s, &t).unwrap() - 0.7477).abs() < 1e-4);
        assert!((libm::cosh(2.0 * r) - 1.0 / 0.7477).abs() < 1e-5);
    }

    #[test]
    fn large_samples_agree_with_exact_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let part = Partition::new(1, 1).unwrap();
        let gamma = squeezed_vacuum_cm(0.6).unwrap();
        let dirs = tomography_directions(2).unwrap();
        let (s, t) = (SdpSettings::default(), Tolerances::default());
        let out = two_dataset_estimate(&gamma, &part, &dirs, 1_000_000, 3.0, &s, &t, &mut rng)
            .unwrap()
            .unwrap();
        let exact = 1.0 / libm::cosh(1.2);
        assert!((out.estimate.z_bar - exact).abs() < 3.0 * out.estimate.delta_z + 1e-3);
        assert!(out.detected);
    }

    #[test]
    fn nonsteerable_rarely_detected_under_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let part = Partition::new(1, 1).unwrap();
        let (s, t) = (SdpSettings::default(), Tolerances::default());
        let mut detected = 0;
        for _ in 0..40 {
            let gamma = random_nonsteerable_cm(&part, &mut rng).unwrap();
            let dirs: Vec<_> = (0..8).map(|_| random_direction(2, &mut rng).unwrap()).collect();
            if let Some(out) = two_dataset_estimate(&gamma, &part, &dirs, 1000, 3.0, &s, &t, &mut rng).unwrap() {
                detected += out.detected as usize;
            }
        }
        assert!(detected <= 1, "{detected}");
    }

    #[test]
    fn representative_sequence_detects_at_every_prefix() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let part = Partition::new(1, 1).unwrap();
        let gamma = squeezed_vacuum_cm(0.4).unwrap();
        let (s, t) = (SdpSettings::default(), Tolerances::default());
        let rep = representative_sequence(&gamma, &part, &[7, 9], 30, 3.0, &s, &t, &mut rng).unwrap().unwrap();
        assert_eq!(rep.directions.len(), 9);
        assert!(rep.eligible >= 1 && rep.eligible <= 30);
        for p in &rep.prefixes {
            assert!(p.value < 1.0 && p.predicted_threshold > 1.0);
        }
        assert!(representative_sequence(&gamma, &part, &[], 3, 3.0, &s, &t, &mut rng).is_err());
    }

    #[test]
    fn resimulated_spread_tracks_the_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let (c, m) = ([0.4, -0.1, 0.3], [1.5, 2.0, 0.7]);
        let (mean, std) = resimulated_spread(&c, &m, 500, 20_000, &mut rng).unwrap();
        let e = error_propagation(&c, &m, 500).unwrap();
        assert!((mean - e.z_bar).abs() < 5.0 * e.delta_z / (20_000f64).sqrt());
        assert!((std / e.delta_z - 1.0).abs() < 0.03);
    }

    #[test]
    fn grid_and_median() {
        assert_eq!(log_grid(100, 1000), alloc::vec![100, 150, 200, 300, 500, 700, 1000]);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        assert!(predicted_threshold(&[1.0], &[1.5], 3.0).is_none());
    }
}
