//! Homodyne measurement directions, their rank-one measurement matrices and
//! simulated quadrature data.
//!
//! A single detector sees the mode
//! `k̂ = e^{iφ₁} cos φ â + e^{iφ₂} sin φ cos ψ b̂ + sin φ sin ψ ĉ`
//! (two modes: `ψ = 0`, `φ₂ = 0`), and records the quadrature
//! `x_θ = (e^{-iθ} k̂ + e^{iθ} k̂†)/√2`. Its variance is `Tr[P γ]` with
//! `P = u uᵀ`.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::CovarianceMatrix;
use crate::linalg::sym_eigen;

/// Optical angles of one homodyne setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementDirection {
    /// Local-oscillator phase, `[0, π]`.
    pub theta: f64,
    /// Polarization rotation, `[0, π]`.
    pub phi: f64,
    /// Phase on the first mode, `[0, 2π)`.
    pub varphi1: f64,
    /// Second mixing angle (three modes only), `[0, π]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
    /// Phase on the second mode (three modes only), `[0, 2π)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub varphi2: Option<f64>,
}

impl MeasurementDirection {
    pub fn two_mode(theta: f64, phi: f64, varphi1: f64) -> Self {
        Self { theta, phi, varphi1, psi: None, varphi2: None }
    }

    pub fn three_mode(theta: f64, phi: f64, varphi1: f64, psi: f64, varphi2: f64) -> Self {
        Self { theta, phi, varphi1, psi: Some(psi), varphi2: Some(varphi2) }
    }

    /// Number of modes implied by the populated fields.
    pub fn modes(&self) -> Result<usize> {
        match (self.psi, self.varphi2) {
            (None, None) => Ok(2),
            (Some(_), Some(_)) => Ok(3),
            _ => Err(invalid("direction", "psi and varphi2 must be given together")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let half = |v: f64| (0.0..=PI).contains(&v);
        let full = |v: f64| (0.0..2.0 * PI).contains(&v);
        if !half(self.theta) {
            return Err(invalid("theta", "outside [0, π]"));
        }
        if !half(self.phi) {
            return Err(invalid("phi", "outside [0, π]"));
        }
        if !full(self.varphi1) {
            return Err(invalid("varphi1", "outside [0, 2π)"));
        }
        if self.modes()? == 3 {
            if !self.psi.is_some_and(half) {
                return Err(invalid("psi", "outside [0, π]"));
            }
            if !self.varphi2.is_some_and(full) {
                return Err(invalid("varphi2", "outside [0, 2π)"));
            }
        }
        Ok(())
    }

    /// Quadrature coefficient vector `u`, unit norm.
    pub fn unit_vector(&self) -> Result<DVector<f64>> {
        self.validate()?;
        let (t, (sf, cf)) = (self.theta, libm::sincos(self.phi));
        let d1 = t - self.varphi1;
        let u = match self.modes()? {
            2 => alloc::vec![
                cf * libm::cos(d1),
                cf * libm::sin(d1),
                sf * libm::cos(t),
                sf * libm::sin(t),
            ],
            _ => {
                let (sp, cp) = libm::sincos(self.psi.unwrap_or(0.0));
                let d2 = t - self.varphi2.unwrap_or(0.0);
                alloc::vec![
                    cf * libm::cos(d1),
                    cf * libm::sin(d1),
                    sf * cp * libm::cos(d2),
                    sf * cp * libm::sin(d2),
                    sf * sp * libm::cos(t),
                    sf * sp * libm::sin(t),
                ]
            }
        };
        Ok(DVector::from_vec(u))
    }
}

/// `P = u uᵀ` for a unit vector `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    u: DVector<f64>,
    p: DMatrix<f64>,
}

impl MeasurementMatrix {
    pub fn from_unit_vector(u: DVector<f64>) -> Result<Self> {
        let norm = u.norm();
        if !((norm - 1.0).abs() < 1e-12) {
            return Err(invalid("measurement vector", alloc::format!("norm {norm} ≠ 1")));
        }
        let p = &u * u.transpose();
        Ok(Self { u, p })
    }

    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }
}

pub fn measurement_matrix(dir: &MeasurementDirection, n_modes: usize) -> Result<MeasurementMatrix> {
    let implied = dir.modes()?;
    if implied != n_modes {
        return Err(Error::DimensionMismatch { expected: n_modes, found: implied });
    }
    MeasurementMatrix::from_unit_vector(dir.unit_vector()?)
}

/// Expected quadrature variance `Tr[P γ] = uᵀ γ u`.
pub fn expected_variance(p: &MeasurementMatrix, gamma: &CovarianceMatrix) -> Result<f64> {
    if p.dim() != gamma.dim() {
        return Err(Error::DimensionMismatch { expected: gamma.dim(), found: p.dim() });
    }
    Ok((p.u().transpose() * gamma.entries() * p.u())[(0, 0)])
}

/// Independent uniform angles on their ranges.
pub fn random_direction<R: Rng + ?Sized>(n_modes: usize, rng: &mut R) -> Result<MeasurementDirection> {
    let mut half = || rng.random::<f64>() * PI;
    let (theta, phi) = (half(), half());
    let varphi1 = rng.random::<f64>() * 2.0 * PI;
    match n_modes {
        2 => Ok(MeasurementDirection::two_mode(theta, phi, varphi1)),
        3 => {
            let psi = rng.random::<f64>() * PI;
            let varphi2 = rng.random::<f64>() * 2.0 * PI;
            Ok(MeasurementDirection::three_mode(theta, phi, varphi1, psi, varphi2))
        }
        _ => Err(invalid("n_modes", "homodyne scheme supports 2 or 3 modes")),
    }
}

/// Fixed tomographically complete settings: `N(2N+1)` directions reading
/// every `x_i²`, `p_i²`, `(x_i+p_i)²/2` and the four cross-quadrature pairs
/// of every two modes.
pub fn tomography_directions(n_modes: usize) -> Result<Vec<MeasurementDirection>> {
    let (q, h) = (FRAC_PI_4, FRAC_PI_2);
    match n_modes {
        2 => Ok([
            (0.0, 0.0, 0.0),
            (h, 0.0, 0.0),
            (q, 0.0, 0.0),
            (0.0, h, 0.0),
            (h, h, 0.0),
            (q, h, 0.0),
            (0.0, q, 0.0),
            (h, q, 0.0),
            (0.0, q, h),
            (h, q, h),
        ]
        .iter()
        .map(|&(t, f, v)| MeasurementDirection::two_mode(t, f, v))
        .collect()),
        3 => {
            let mut dirs = Vec::with_capacity(21);
            // (phi, psi) selecting a single mode, then the three local angles.
            for (phi, psi) in [(0.0, 0.0), (h, 0.0), (h, h)] {
                for theta in [0.0, h, q] {
                    dirs.push(MeasurementDirection::three_mode(theta, phi, 0.0, psi, 0.0));
                }
            }
            // Mode pairs (1,2), (1,3), (2,3): phases select x/p on each side.
            for (theta, v) in [(0.0, 0.0), (h, 0.0), (0.0, h), (h, h)] {
                dirs.push(MeasurementDirection::three_mode(theta, q, v, 0.0, 0.0));
                dirs.push(MeasurementDirection::three_mode(theta, q, v, h, 0.0));
                dirs.push(MeasurementDirection::three_mode(theta, h, 0.0, q, v));
            }
            Ok(dirs)
        }
        _ => Err(invalid("n_modes", "homodyne scheme supports 2 or 3 modes")),
    }
}

/// Gram matrix `G_ij = Tr[P_i P_j] = (u_i·u_j)²`.
pub fn measurement_gram(matrices: &[MeasurementMatrix]) -> DMatrix<f64> {
    let k = matrices.len();
    DMatrix::from_fn(k, k, |i, j| {
        let d = matrices[i].u().dot(matrices[j].u());
        d * d
    })
}

pub fn gram_rank(matrices: &[MeasurementMatrix]) -> usize {
    let gram = measurement_gram(matrices);
    let (values, _) = sym_eigen(&gram);
    let top = values.last().copied().unwrap_or(0.0);
    values.iter().filter(|&&v| v > 1e-10 * top.max(1.0)).count()
}

/// Least-squares reconstruction of `γ` from noiseless variances over a
/// tomographically complete set of measurement matrices.
pub fn reconstruct_covariance(
    matrices: &[MeasurementMatrix],
    variances: &[f64],
) -> Result<DMatrix<f64>> {
    let dim = matrices.first().map(MeasurementMatrix::dim).unwrap_or(0);
    if matrices.len() != variances.len() {
        return Err(Error::DimensionMismatch { expected: matrices.len(), found: variances.len() });
    }
    let params = dim * (dim + 1) / 2;
    if gram_rank(matrices) < params {
        return Err(invalid("measurement set", "not tomographically complete"));
    }
    // Basis of symmetric matrices: E_ii and E_ij + E_ji.
    let mut design = DMatrix::zeros(matrices.len(), params);
    for (row, m) in matrices.iter().enumerate() {
        let mut col = 0;
        for i in 0..dim {
            for j in i..dim {
                design[(row, col)] = if i == j { m.p()[(i, i)] } else { 2.0 * m.p()[(i, j)] };
                col += 1;
            }
        }
    }
    let rhs = DVector::from_column_slice(variances);
    let normal = design.transpose() * &design;
    let solved = normal
        .cholesky()
        .ok_or_else(|| invalid("measurement set", "not tomographically complete"))?
        .solve(&(design.transpose() * rhs));
    let mut gamma = DMatrix::zeros(dim, dim);
    let mut col = 0;
    for i in 0..dim {
        for j in i..dim {
            gamma[(i, j)] = solved[col];
            gamma[(j, i)] = solved[col];
            col += 1;
        }
    }
    Ok(gamma)
}

/// Quadrature outcomes of `n` repetitions of one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomodyneSampleSet {
    pub direction_index: usize,
    pub samples: Vec<f64>,
}

impl HomodyneSampleSet {
    pub fn repetitions(&self) -> usize {
        self.samples.len()
    }
}

/// `n` draws from `Normal(0, Tr[Pγ])`.
pub fn simulate_homodyne<R: Rng + ?Sized>(
    p: &MeasurementMatrix,
    gamma: &CovarianceMatrix,
    n: usize,
    direction_index: usize,
    rng: &mut R,
) -> Result<HomodyneSampleSet> {
    if n < 2 {
        return Err(invalid("repetitions", "need at least 2 samples"));
    }
    let variance = expected_variance(p, gamma)?;
    let normal = Normal::new(0.0, libm::sqrt(variance))
        .map_err(|_| invalid("variance", "not a valid normal scale"))?;
    let samples = (0..n).map(|_| normal.sample(rng)).collect();
    Ok(HomodyneSampleSet { direction_index, samples })
}

/// Unbiased sample variance `Σ(x - x̄)²/(n-1)`.
pub fn sample_variance(set: &HomodyneSampleSet) -> Result<f64> {
    let n = set.samples.len();
    if n < 2 {
        return Err(invalid("repetitions", "need at least 2 samples"));
    }
    let mean = set.samples.iter().sum::<f64>() / n as f64;
    let ss: f64 = set.samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    Ok(ss / (n - 1) as f64)
}

/// Draws a sample variance of `n` Gaussian outcomes with true variance `m`
/// directly from its law `m·χ²_{n-1}/(n-1)`.
pub fn draw_sample_variance<R: Rng + ?Sized>(m: f64, n: usize, rng: &mut R) -> Result<f64> {
    if n < 2 {
        return Err(invalid("repetitions", "need at least 2 samples"));
    }
    let dof = (n - 1) as f64;
    let chi = ChiSquared::new(dof).map_err(|_| invalid("repetitions", "invalid degrees of freedom"))?;
    Ok(m * chi.sample(rng) / dof)
}

/// Measurement matrices for a list of directions.
pub fn measurement_matrices(
    dirs: &[MeasurementDirection],
    n_modes: usize,
) -> Result<Vec<MeasurementMatrix>> {
    dirs.iter().map(|d| measurement_matrix(d, n_modes)).collect()
}

/// `Tr[Pγ]` for every matrix.
pub fn expected_variances(
    matrices: &[MeasurementMatrix],
    gamma: &CovarianceMatrix,
) -> Result<Vec<f64>> {
    matrices.iter().map(|p| expected_variance(p, gamma)).collect()
}
