//! Steering witnesses `Z = Σ cⱼ Pⱼ` assembled from homodyne measurement
//! matrices, found by minimizing `c·m` under
//! `Z ⪰ 0` and `Z_B + iΩ/(2N_B) ⪰ 0`, and the repeat-until-success loop
//! that adds random directions until the witness value drops below one.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::{symplectic_eigenvalues, symplectic_form, williamson, CovarianceMatrix, Partition};
use crate::homodyne::{
    draw_sample_variance, expected_variance, measurement_matrix, random_direction, MeasurementDirection,
    MeasurementMatrix,
};
use crate::linalg::{doubled_embedding, min_eigenvalue, sym_eigen};
use crate::sdp::{solve_lmi, LmiProblem, SdpSettings, SdpStatus};
use crate::stats::error_propagation;
use crate::steering::steering_measure;
use crate::tolerance::Tolerances;

/// Relative size below which a measurement matrix is treated as lying in
/// the span of those already selected.
const DEPENDENCE_TOLERANCE: f64 = 1e-9;
/// Relative mismatch of variances along a redundant direction that makes
/// the objective unbounded.
const CONSISTENCY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct WitnessProblem {
    matrices: Vec<MeasurementMatrix>,
    variances: Vec<f64>,
    partition: Partition,
}

impl WitnessProblem {
    pub fn new(matrices: Vec<MeasurementMatrix>, variances: Vec<f64>, partition: Partition) -> Result<Self> {
        if matrices.is_empty() {
            return Err(invalid("witness problem", "need at least one measurement"));
        }
        if matrices.len() != variances.len() {
            return Err(Error::DimensionMismatch { expected: matrices.len(), found: variances.len() });
        }
        for p in &matrices {
            partition.check_dim(p.dim())?;
        }
        if variances.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(invalid("variances", "must be finite and strictly positive"));
        }
        Ok(Self { matrices, variances, partition })
    }

    pub fn matrices(&self) -> &[MeasurementMatrix] {
        &self.matrices
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessStatus {
    Optimal,
    Infeasible,
    /// Redundant directions with inconsistent variances (noisy data only).
    Unbounded,
    SolverFailure,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub relative_gap: f64,
    pub dual_infeasibility: f64,
    /// Indices of directions dropped as linearly dependent.
    pub redundant: Vec<usize>,
    /// Outcome of the exact witness check on the returned `Z`.
    pub verified: bool,
    /// The solver stopped at its fallback accuracy rather than the strict one.
    pub near_optimal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessCandidate {
    pub coefficients: Vec<f64>,
    #[serde(with = "crate::linalg::matrix_rows")]
    pub z: DMatrix<f64>,
    pub value: f64,
    pub status: WitnessStatus,
    pub diagnostics: SolverDiagnostics,
}

impl WitnessCandidate {
    fn without_solution(status: WitnessStatus, k: usize, dim: usize, diagnostics: SolverDiagnostics) -> Self {
        Self {
            coefficients: alloc::vec![0.0; k],
            z: DMatrix::zeros(dim, dim),
            value: f64::NAN,
            status,
            diagnostics,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == WitnessStatus::Optimal
    }
}

/// `Σ cⱼ Pⱼ`.
pub fn assemble_witness(matrices: &[MeasurementMatrix], c: &[f64]) -> DMatrix<f64> {
    let dim = matrices.first().map(MeasurementMatrix::dim).unwrap_or(0);
    let mut z = DMatrix::zeros(dim, dim);
    for (p, cj) in matrices.iter().zip(c) {
        z += p.p() * *cj;
    }
    z
}

/// Exact characterization of a second-moment steering witness:
/// `Z ⪰ 0` and `str[Z_B] ≥ ½`.
pub fn verify_witness(z: &DMatrix<f64>, part: &Partition, tol: &Tolerances) -> bool {
    if part.check_dim(z.nrows()).is_err() || z.nrows() != z.ncols() {
        return false;
    }
    if min_eigenvalue(z) < -tol.witness_psd {
        return false;
    }
    match symplectic_eigenvalues(&part.bob_block(z)) {
        Ok(s) => s.iter().sum::<f64>() >= 0.5 - tol.witness_str,
        Err(_) => false,
    }
}

/// Minimum eigenvalue of the doubled form of `Z_B + iΩ/(2N_B)`.
pub fn bob_constraint_min_eigenvalue(z: &DMatrix<f64>, part: &Partition) -> f64 {
    let zb = part.bob_block(z);
    let b = symplectic_form(part.n_bob) / (2.0 * part.n_bob as f64);
    min_eigenvalue(&doubled_embedding(&zb, &b))
}

/// Both LMIs of the optimization hold to within `tol`.
pub fn satisfies_sdp_constraints(z: &DMatrix<f64>, part: &Partition, tol: f64) -> bool {
    min_eigenvalue(z) >= -tol && bob_constraint_min_eigenvalue(z, part) >= -tol
}

/// Greedy selection of linearly independent `Pⱼ`; returns the selected
/// indices and, for every other index, its expansion over the selection.
fn independent_subset(matrices: &[MeasurementMatrix]) -> (Vec<usize>, Vec<(usize, DVector<f64>)>) {
    let mut basis: Vec<usize> = Vec::new();
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for (j, p) in matrices.iter().enumerate() {
        let v = DVector::from_column_slice(p.p().as_slice());
        let mut r = v.clone();
        for q in &ortho {
            let proj = q.dot(&r);
            r -= q * proj;
        }
        let norm = r.norm();
        if norm > DEPENDENCE_TOLERANCE * v.norm() {
            ortho.push(r / norm);
            basis.push(j);
        } else {
            dependent.push(j);
        }
    }
    let gram = DMatrix::from_fn(basis.len(), basis.len(), |a, b| {
        let d = matrices[basis[a]].u().dot(matrices[basis[b]].u());
        d * d
    });
    let expansions = dependent
        .into_iter()
        .map(|j| {
            let rhs = DVector::from_iterator(
                basis.len(),
                basis.iter().map(|&i| {
                    let d = matrices[i].u().dot(matrices[j].u());
                    d * d
                }),
            );
            let alpha = gram.clone().lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(basis.len()));
            (j, alpha)
        })
        .collect();
    (basis, expansions)
}

/// Orthonormal basis of the span of the given vectors.
fn range_basis(vectors: &[&DVector<f64>], dim: usize) -> DMatrix<f64> {
    let mut gram = DMatrix::zeros(dim, dim);
    for v in vectors {
        gram += *v * v.transpose();
    }
    let (values, vecs) = sym_eigen(&gram);
    let top = values.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..dim).filter(|&i| values[i] > 1e-10 * top.max(1.0)).collect();
    DMatrix::from_fn(dim, keep.len(), |r, c| vecs[(r, keep[c])])
}

/// Minimizes `c·m` over witnesses built from the problem's directions.
pub fn solve_witness(problem: &WitnessProblem, settings: &SdpSettings, tol: &Tolerances) -> Result<WitnessCandidate> {
    let part = problem.partition;
    let k = problem.matrices.len();
    let dim = part.modes() * 2;
    let (basis, expansions) = independent_subset(&problem.matrices);
    let mut diagnostics = SolverDiagnostics {
        redundant: expansions.iter().map(|(j, _)| *j).collect(),
        ..SolverDiagnostics::default()
    };

    // Feasible iff Bob's parts of the u-vectors span his phase space.
    let a = part.alice_dim();
    let bob_vectors: Vec<DVector<f64>> =
        basis.iter().map(|&j| problem.matrices[j].u().rows(a, part.bob_dim()).into_owned()).collect();
    let bob_refs: Vec<&DVector<f64>> = bob_vectors.iter().collect();
    let mut vv = DMatrix::zeros(part.bob_dim(), part.bob_dim());
    for v in &bob_vectors {
        vv += v * v.transpose();
    }
    let bob_floor = min_eigenvalue(&vv);
    if range_basis(&bob_refs, part.bob_dim()).ncols() < part.bob_dim() || bob_floor <= 0.0 {
        return Ok(WitnessCandidate::without_solution(WitnessStatus::Infeasible, k, dim, diagnostics));
    }

    // Bob's constraint is invariant under symplectic congruence: work with
    // the Williamson form of `Σ vvᵀ`.
    let (bob_vectors, bob_floor) = match williamson(&vv) {
        Ok(form) => {
            let s = form.symplectic.matrix();
            let floor = form.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            (bob_vectors.iter().map(|v| s * v).collect::<Vec<_>>(), floor)
        }
        Err(_) => (bob_vectors, bob_floor),
    };

    let m_basis: Vec<f64> = basis.iter().map(|&j| problem.variances[j]).collect();
    for (j, alpha) in &expansions {
        let predicted: f64 = alpha.iter().zip(&m_basis).map(|(x, y)| x * y).sum();
        let scale: f64 = problem.variances[*j] + alpha.iter().zip(&m_basis).map(|(x, y)| (x * y).abs()).sum::<f64>();
        if (problem.variances[*j] - predicted).abs() > CONSISTENCY_TOLERANCE * scale {
            diagnostics.message = Some(alloc::format!("direction {j} is redundant with inconsistent variance"));
            return Ok(WitnessCandidate::without_solution(WitnessStatus::Unbounded, k, dim, diagnostics));
        }
    }

    // Z ⪰ 0 restricted to the span of the selected u-vectors, where it has
    // an interior.
    let us: Vec<&DVector<f64>> = basis.iter().map(|&j| problem.matrices[j].u()).collect();
    let q = range_basis(&us, dim);
    let r = q.ncols();
    let bob_offset = {
        let b = symplectic_form(part.n_bob) / (2.0 * part.n_bob as f64);
        doubled_embedding(&DMatrix::zeros(part.bob_dim(), part.bob_dim()), &b)
    };
    let coefficients: Vec<Vec<DMatrix<f64>>> = basis
        .iter()
        .zip(&bob_vectors)
        .map(|(&j, v)| {
            let w = q.transpose() * problem.matrices[j].u();
            let vvt = v * v.transpose();
            alloc::vec![&w * w.transpose(), doubled_embedding(&vvt, &DMatrix::zeros(vvt.nrows(), vvt.ncols()))]
        })
        .collect();
    let lmi = LmiProblem::new(
        DVector::from_vec(m_basis.clone()),
        alloc::vec![DMatrix::zeros(r, r), bob_offset],
        coefficients,
    )?;

    let mut t = 1.0 / (part.n_bob as f64 * bob_floor);
    let mut start = None;
    for _ in 0..60 {
        let x0 = DVector::from_element(basis.len(), t);
        if lmi.evaluate(&x0).iter().all(|b| b.clone().cholesky().is_some()) {
            start = Some(x0);
            break;
        }
        t *= 2.0;
    }
    let Some(x0) = start else {
        diagnostics.message = Some(String::from("no strictly feasible starting point"));
        return Ok(WitnessCandidate::without_solution(WitnessStatus::SolverFailure, k, dim, diagnostics));
    };

    let sol = solve_lmi(&lmi, &x0, settings)?;
    diagnostics.iterations = sol.iterations;
    diagnostics.relative_gap = sol.relative_gap;
    diagnostics.dual_infeasibility = sol.dual_infeasibility;
    diagnostics.near_optimal = sol.status == SdpStatus::NearOptimal;
    let status = match sol.status {
        SdpStatus::Optimal | SdpStatus::NearOptimal => WitnessStatus::Optimal,
        SdpStatus::Unbounded => WitnessStatus::Unbounded,
        SdpStatus::IterationLimit | SdpStatus::NumericalFailure => {
            diagnostics.message = Some(alloc::format!("solver stopped: {:?}", sol.status));
            WitnessStatus::SolverFailure
        }
    };
    if status != WitnessStatus::Optimal {
        return Ok(WitnessCandidate::without_solution(status, k, dim, diagnostics));
    }

    let mut c = alloc::vec![0.0; k];
    for (&j, xj) in basis.iter().zip(sol.x.iter()) {
        c[j] = *xj;
    }
    let z = assemble_witness(&problem.matrices, &c);
    let value = c.iter().zip(&problem.variances).map(|(x, y)| x * y).sum();
    diagnostics.verified = verify_witness(&z, &part, tol);
    Ok(WitnessCandidate { coefficients: c, z, value, status, diagnostics })
}

/// Where the variances fed to the optimizer come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceSource {
    /// `Tr[Pγ]` exactly.
    Exact,
    /// Sample variances of `repetitions` simulated outcomes per setting;
    /// one dataset fixes `c`, a second evaluates `Z̄ ± ΔZ̄`.
    Simulated { repetitions: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub max_settings: usize,
    pub variance_source: VarianceSource,
    /// Multiple of `ΔZ̄` required below one with simulated data.
    pub k_sigma: f64,
    pub solver: SdpSettings,
    pub tolerances: Tolerances,
}

impl DetectionConfig {
    pub fn exact(max_settings: usize) -> Self {
        Self {
            max_settings,
            variance_source: VarianceSource::Exact,
            k_sigma: 3.0,
            solver: SdpSettings::default(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_settings < 2 {
            return Err(invalid("max_settings", "must be at least 2"));
        }
        if let VarianceSource::Simulated { repetitions } = self.variance_source {
            if repetitions < 2 {
                return Err(invalid("repetitions", "need at least 2 samples"));
            }
        }
        if !(self.k_sigma >= 0.0) {
            return Err(invalid("k_sigma", "must be non-negative"));
        }
        Ok(())
    }
}

/// `N(2N+1)` for two modes; half as much again for three, where the
/// optimum can need more directions than tomography.
pub fn default_max_settings(n_modes: usize) -> usize {
    let full = n_modes * (2 * n_modes + 1);
    if n_modes >= 3 {
        (3 * full).div_ceil(2)
    } else {
        full
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub settings: usize,
    pub status: WitnessStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    pub retried: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub measure: f64,
    pub detected: bool,
    pub settings_used: usize,
    pub final_value: Option<f64>,
    pub witness: Option<WitnessCandidate>,
    pub directions: Vec<MeasurementDirection>,
    pub rounds: Vec<RoundLog>,
}

/// Solves once, and once more with jittered settings if the first attempt
/// fails numerically. The flag reports whether the retry was needed.
pub fn solve_witness_with_retry(
    problem: &WitnessProblem,
    settings: &SdpSettings,
    tol: &Tolerances,
) -> Result<(WitnessCandidate, bool)> {
    let first = solve_witness(problem, settings, tol)?;
    if first.status != WitnessStatus::SolverFailure {
        return Ok((first, false));
    }
    let second = solve_witness(problem, &settings.jittered(), tol)?;
    if second.status == WitnessStatus::SolverFailure {
        return Err(Error::SolverFailure(
            second.diagnostics.message.unwrap_or_else(|| String::from("retry failed")),
        ));
    }
    Ok((second, true))
}

/// Repeat-until-success detection: two random settings, then one more per
/// round until the witness value falls below one or the budget runs out.
pub fn detect_steering<R: Rng + ?Sized>(
    gamma: &CovarianceMatrix,
    part: &Partition,
    config: &DetectionConfig,
    rng: &mut R,
) -> Result<DetectionRecord> {
    config.validate()?;
    part.check_dim(gamma.dim())?;
    let n_modes = gamma.modes();
    let measure = steering_measure(gamma, part)?;
    let threshold = 1.0 - config.tolerances.detection;

    let mut directions = Vec::new();
    let mut matrices = Vec::new();
    let mut fit = Vec::new();
    let mut check = Vec::new();
    let mut rounds = Vec::new();
    let mut record = DetectionRecord {
        measure,
        detected: false,
        settings_used: 0,
        final_value: None,
        witness: None,
        directions: Vec::new(),
        rounds: Vec::new(),
    };

    while directions.len() < config.max_settings {
        let dir = random_direction(n_modes, rng)?;
        let p = measurement_matrix(&dir, n_modes)?;
        let m = expected_variance(&p, gamma)?;
        match config.variance_source {
            VarianceSource::Exact => fit.push(m),
            VarianceSource::Simulated { repetitions } => {
                fit.push(draw_sample_variance(m, repetitions, rng)?);
                check.push(draw_sample_variance(m, repetitions, rng)?);
            }
        }
        directions.push(dir);
        matrices.push(p);
        if directions.len() < 2 {
            continue;
        }

        let problem = WitnessProblem::new(matrices.clone(), fit.clone(), *part)?;
        let (candidate, retried) = solve_witness_with_retry(&problem, &config.solver, &config.tolerances)?;
        let mut log = RoundLog { settings: directions.len(), status: candidate.status, value: None, error: None, retried };
        let mut detected = false;
        if candidate.is_optimal() {
            match config.variance_source {
                VarianceSource::Exact => {
                    log.value = Some(candidate.value);
                    detected = candidate.value < threshold;
                }
                VarianceSource::Simulated { repetitions } => {
                    let est = error_propagation(&candidate.coefficients, &check, repetitions)?;
                    log.value = Some(est.z_bar);
                    log.error = Some(est.delta_z);
                    detected = est.z_bar + config.k_sigma * est.delta_z < threshold;
                }
            }
            record.final_value = log.value;
            record.witness = Some(candidate);
        }
        rounds.push(log);
        record.settings_used = directions.len();
        if detected {
            record.detected = true;
            break;
        }
    }
    record.directions = directions;
    record.rounds = rounds;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homodyne::{expected_variances, measurement_matrices, tomography_directions};
    use crate::states::{ghz_cm, random_nonsteerable_cm, squeezed_vacuum_cm, thermal_cm, GhzParams};
    use crate::steering::minimal_witness_prediction;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tomography_problem(gamma: &CovarianceMatrix, part: Partition) -> WitnessProblem {
        let mats = measurement_matrices(&tomography_directions(gamma.modes()).unwrap(), gamma.modes()).unwrap();
        let vars = expected_variances(&mats, gamma).unwrap();
        WitnessProblem::new(mats, vars, part).unwrap()
    }

    fn solve(problem: &WitnessProblem) -> WitnessCandidate {
        solve_witness(problem, &SdpSettings::default(), &Tolerances::default()).unwrap()
    }

    #[test]
    fn tomography_matches_closed_form_on_svs() {
        let part = Partition::new(1, 1).unwrap();
        for r in [0.3, 1.0, 2.0] {
            let gamma = squeezed_vacuum_cm(r).unwrap();
            let w = solve(&tomography_problem(&gamma, part));
            assert_eq!(w.status, WitnessStatus::Optimal);
            let expected = 1.0 / libm::cosh(2.0 * r);
            assert!((w.value - expected).abs() < 1e-6, "r={r}: {} vs {expected}", w.value);
            assert!((-libm::log(w.value) - libm::log(libm::cosh(2.0 * r))).abs() < 1e-4);
            let pred = minimal_witness_prediction(&gamma, &part).unwrap();
            assert!((w.value - pred.value).abs() < 1e-6);
            assert!(w.diagnostics.verified);
            assert!(satisfies_sdp_constraints(&w.z, &part, 1e-8));
        }
    }

    #[test]
    fn alice_only_directions_are_infeasible() {
        let part = Partition::new(1, 1).unwrap();
        let gamma = squeezed_vacuum_cm(0.5).unwrap();
        let dirs = [
            MeasurementDirection::two_mode(0.0, 0.0, 0.0),
            MeasurementDirection::two_mode(core::f64::consts::FRAC_PI_2, 0.0, 0.0),
        ];
        let mats = measurement_matrices(&dirs, 2).unwrap();
        let vars = expected_variances(&mats, &gamma).unwrap();
        let w = solve(&WitnessProblem::new(mats, vars, part).unwrap());
        assert_eq!(w.status, WitnessStatus::Infeasible);
    }

    #[test]
    fn nearly_parallel_bob_parts() {
        let part = Partition::new(1, 1).unwrap();
        let gamma = squeezed_vacuum_cm(1.77).unwrap();
        for eps in [1e-2, 1e-3, 1e-4] {
            let bob = [0.55, 0.83];
            let u1 = DVector::from_vec(alloc::vec![-0.53, 0.31, bob[0], bob[1]]).normalize();
            let u2 = DVector::from_vec(alloc::vec![0.35, 0.52, bob[0] - eps, bob[1]]).normalize();
            let cross = u1[2] * u2[3] - u1[3] * u2[2];
            let mats: Vec<_> = [u1, u2].into_iter().map(|u| MeasurementMatrix::from_unit_vector(u).unwrap()).collect();
            let vars = expected_variances(&mats, &gamma).unwrap();
            let w = solve(&WitnessProblem::new(mats, vars.clone(), part).unwrap());
            assert_eq!(w.status, WitnessStatus::Optimal, "eps={eps}");
            let expected = libm::sqrt(vars[0] * vars[1]) / cross.abs();
            assert!((w.value - expected).abs() < 1e-6 * expected, "eps={eps}: {} vs {expected}", w.value);
        }
    }

    #[test]
    fn nonsteerable_states_stay_above_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let part = Partition::new(1, 1).unwrap();
        for _ in 0..10 {
            let gamma = random_nonsteerable_cm(&part, &mut rng).unwrap();
            let w = solve(&tomography_problem(&gamma, part));
            assert_eq!(w.status, WitnessStatus::Optimal);
            assert!(w.value >= 1.0 - 1e-6, "{}", w.value);
        }
        let w = solve(&tomography_problem(&thermal_cm(&[2.0, 3.0]).unwrap(), part));
        assert!(w.value >= 1.0 - 1e-6);
    }

    #[test]
    fn boundary_and_invalid_witnesses() {
        let part = Partition::new(1, 1).unwrap();
        let tol = Tolerances::default();
        let half = part.embed_bob(&(DMatrix::identity(2, 2) * 0.5));
        assert!(verify_witness(&half, &part, &tol));
        let quarter = part.embed_bob(&(DMatrix::identity(2, 2) * 0.25));
        assert!(!verify_witness(&quarter, &part, &tol));
        let mut indefinite = half.clone();
        indefinite[(0, 0)] = -0.1;
        assert!(!verify_witness(&indefinite, &part, &tol));
    }

    #[test]
    fn redundant_directions_with_exact_data() {
        let part = Partition::new(1, 1).unwrap();
        let gamma = squeezed_vacuum_cm(0.7).unwrap();
        let mut dirs = tomography_directions(2).unwrap();
        dirs.push(MeasurementDirection::two_mode(0.3, 1.1, 2.0));
        let mats = measurement_matrices(&dirs, 2).unwrap();
        let vars = expected_variances(&mats, &gamma).unwrap();
        let w = solve(&WitnessProblem::new(mats.clone(), vars.clone(), part).unwrap());
        assert_eq!(w.status, WitnessStatus::Optimal);
        assert_eq!(w.diagnostics.redundant, alloc::vec![10]);
        assert!((w.value - 1.0 / libm::cosh(1.4)).abs() < 1e-6);

        let mut noisy = vars;
        noisy[10] *= 1.01;
        let w = solve(&WitnessProblem::new(mats, noisy, part).unwrap());
        assert_eq!(w.status, WitnessStatus::Unbounded);
    }

    #[test]
    fn value_does_not_increase_with_more_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let part = Partition::new(1, 1).unwrap();
        let gamma = squeezed_vacuum_cm(1.2).unwrap();
        let mut mats = Vec::new();
        let mut last = f64::INFINITY;
        for _ in 0..10 {
            mats.push(measurement_matrix(&random_direction(2, &mut rng).unwrap(), 2).unwrap());
            let vars = expected_variances(&mats, &gamma).unwrap();
            let w = solve(&WitnessProblem::new(mats.clone(), vars, part).unwrap());
            if w.is_optimal() {
                assert!(w.value <= last + 1e-7, "{} > {last}", w.value);
                last = w.value;
            }
        }
        assert!(last < 1.0);
    }

    #[test]
    fn three_mode_ghz_tomography() {
        let part = Partition::new(1, 2).unwrap();
        let gamma = ghz_cm(&GhzParams::new(5.0).unwrap()).unwrap();
        let w = solve(&tomography_problem(&gamma, part));
        assert_eq!(w.status, WitnessStatus::Optimal);
        assert!(w.value < 1.0);
        assert!(w.diagnostics.verified);
        let zb = part.bob_block(&w.z);
        for s in symplectic_eigenvalues(&zb).unwrap() {
            assert!(s >= 0.25 - 1e-7);
        }
    }

    #[test]
    fn detection_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let part = Partition::new(1, 1).unwrap();
        let rec = detect_steering(&squeezed_vacuum_cm(2.0).unwrap(), &part, &DetectionConfig::exact(10), &mut rng).unwrap();
        assert!(rec.detected && rec.settings_used <= 10);
        assert!(rec.final_value.unwrap() < 1.0 - 1e-7);

        let gamma = random_nonsteerable_cm(&part, &mut rng).unwrap();
        let rec = detect_steering(&gamma, &part, &DetectionConfig::exact(10), &mut rng).unwrap();
        assert!(!rec.detected);
        assert_eq!(rec.settings_used, 10);
        assert_eq!(rec.rounds.len(), 9);
        for round in &rec.rounds {
            if let Some(v) = round.value {
                assert!(v >= 1.0 - 1e-6);
            }
        }
    }

    #[test]
    fn detection_with_simulated_variances() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let part = Partition::new(1, 1).unwrap();
        let mut config = DetectionConfig::exact(10);
        config.variance_source = VarianceSource::Simulated { repetitions: 1_000_000 };
        let rec = detect_steering(&squeezed_vacuum_cm(0.5).unwrap(), &part, &config, &mut rng).unwrap();
        assert!(rec.detected, "{:?}", rec.rounds);
        let last = rec.rounds.last().unwrap();
        assert!(last.value.unwrap() + 3.0 * last.error.unwrap() < 1.0);
        config.max_settings = 1;
        assert!(detect_steering(&squeezed_vacuum_cm(1.5).unwrap(), &part, &config, &mut rng).is_err());
    }
}
