//! Symplectic linear algebra on real `2N×2N` phase-space matrices.
//!
//! All matrices use the mode-interleaved ordering `(x₁, p₁, …, x_N, p_N)` and
//! are normalized so that the vacuum covariance matrix is the identity.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{
    check_symmetric, doubled_embedding, max_abs, min_eigenvalue, spectral_map, symmetrize,
    to_complex,
};
use crate::tolerance::Tolerances;

/// Allowed entrywise defect of `S Ω Sᵀ - Ω` for a symplectic matrix.
pub const SYMPLECTIC_TOLERANCE: f64 = 1e-10;

fn phase_space_modes(m: &DMatrix<f64>) -> Result<usize> {
    let (rows, cols) = m.shape();
    if rows != cols || rows == 0 || rows % 2 != 0 {
        return Err(Error::NotPhaseSpace { rows, cols });
    }
    Ok(rows / 2)
}

/// Real symmetric `2N×2N` second-moment matrix.
///
/// Physicality (`γ + iΩ ⪰ 0`) is a predicate, not a construction invariant:
/// witness and Schur-complement matrices share this container.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    modes: usize,
    entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Validates shape and symmetry, then stores the exactly symmetrized matrix.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let modes = phase_space_modes(&entries)?;
        check_symmetric(&entries, Tolerances::default().symmetry)?;
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(invalid("covariance matrix", "non-finite entry"));
        }
        Ok(Self {
            modes,
            entries: symmetrize(&entries),
        })
    }

    /// The vacuum state.
    pub fn vacuum(modes: usize) -> Self {
        Self {
            modes,
            entries: DMatrix::identity(2 * modes, 2 * modes),
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        2 * self.modes
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        cmc_min_eigenvalue(&self.entries) >= -tol
    }

    /// `S γ Sᵀ`.
    pub fn transformed(&self, s: &SymplecticMatrix) -> Result<Self> {
        if s.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: s.dim(),
            });
        }
        let m = s.matrix() * &self.entries * s.matrix().transpose();
        Ok(Self {
            modes: self.modes,
            entries: symmetrize(&m),
        })
    }
}

/// Split of the modes into Alice (the first `n_alice` modes) and Bob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    pub n_alice: usize,
    pub n_bob: usize,
}

impl Partition {
    pub fn new(n_alice: usize, n_bob: usize) -> Result<Self> {
        if n_alice == 0 || n_bob == 0 {
            return Err(invalid("partition", "both parties need at least one mode"));
        }
        Ok(Self { n_alice, n_bob })
    }

    pub fn modes(&self) -> usize {
        self.n_alice + self.n_bob
    }

    pub fn alice_dim(&self) -> usize {
        2 * self.n_alice
    }

    pub fn bob_dim(&self) -> usize {
        2 * self.n_bob
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != 2 * self.modes() {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.modes(),
                found: dim,
            });
        }
        Ok(())
    }

    pub fn alice_block(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let a = self.alice_dim();
        m.view((0, 0), (a, a)).into_owned()
    }

    pub fn bob_block(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let (a, b) = (self.alice_dim(), self.bob_dim());
        m.view((a, a), (b, b)).into_owned()
    }

    /// The Alice×Bob correlation block `γ₁₂`.
    pub fn cross_block(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let (a, b) = (self.alice_dim(), self.bob_dim());
        m.view((0, a), (a, b)).into_owned()
    }

    /// Embeds a Bob-sized matrix as `0_A ⊕ m`.
    pub fn embed_bob(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let (a, b) = (self.alice_dim(), self.bob_dim());
        let mut out = DMatrix::zeros(a + b, a + b);
        out.view_mut((a, a), (b, b)).copy_from(m);
        out
    }
}

/// Real matrix preserving the symplectic form: `S Ω Sᵀ = Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix(DMatrix<f64>);

impl SymplecticMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        phase_space_modes(&m)?;
        let defect = symplectic_defect(&m);
        if !(defect <= SYMPLECTIC_TOLERANCE) {
            return Err(invalid(
                "symplectic matrix",
                alloc::format!("S Ω Sᵀ deviates from Ω by {defect:e}"),
            ));
        }
        Ok(Self(m))
    }

    pub(crate) fn new_unchecked(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn identity(modes: usize) -> Self {
        Self(DMatrix::identity(2 * modes, 2 * modes))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn modes(&self) -> usize {
        self.0.nrows() / 2
    }

    pub fn defect(&self) -> f64 {
        symplectic_defect(&self.0)
    }

    /// `self · other`; symplectic matrices form a group.
    pub fn compose(&self, other: &SymplecticMatrix) -> SymplecticMatrix {
        Self(&self.0 * &other.0)
    }

    /// Local operation `S_A ⊕ S_B`.
    pub fn direct_sum(&self, other: &SymplecticMatrix) -> SymplecticMatrix {
        Self(crate::linalg::direct_sum(&self.0, &other.0))
    }
}

/// Williamson normal form: `S M Sᵀ = diag(s₁, s₁, …, s_N, s_N)`.
#[derive(Debug, Clone)]
pub struct WilliamsonForm {
    pub symplectic: SymplecticMatrix,
    /// Ascending symplectic eigenvalues.
    pub eigenvalues: Vec<f64>,
}

impl WilliamsonForm {
    /// The diagonal normal form `diag(s₁, s₁, …)`.
    pub fn normal_form(&self) -> DMatrix<f64> {
        let n = self.eigenvalues.len();
        DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            if i == j {
                self.eigenvalues[i / 2]
            } else {
                0.0
            }
        })
    }
}

/// `Ω_N = ⊕ [[0, 1], [-1, 0]]`.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

pub(crate) fn symplectic_defect(s: &DMatrix<f64>) -> f64 {
    let omega = symplectic_form(s.nrows() / 2);
    max_abs(&(s * &omega * s.transpose() - omega))
}

/// Minimum eigenvalue of the real form of `γ + iΩ`.
pub(crate) fn cmc_min_eigenvalue(gamma: &DMatrix<f64>) -> f64 {
    let omega = symplectic_form(gamma.nrows() / 2);
    min_eigenvalue(&doubled_embedding(gamma, &omega))
}

/// Covariance matrix criterion `γ + iΩ ⪰ 0`, checked on `[[γ, -Ω], [Ω, γ]]`.
pub fn is_physical_cm(gamma: &DMatrix<f64>, tol: f64) -> Result<bool> {
    phase_space_modes(gamma)?;
    Ok(cmc_min_eigenvalue(gamma) >= -tol)
}

/// Symplectic spectrum of a symmetric positive-semidefinite matrix, ascending.
pub fn symplectic_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    symplectic_eigenvalues_with(m, &Tolerances::default())
}

pub fn symplectic_eigenvalues_with(m: &DMatrix<f64>, tol: &Tolerances) -> Result<Vec<f64>> {
    let modes = phase_space_modes(m)?;
    check_symmetric(m, tol.symmetry)?;
    let scale = max_abs(m).max(1.0);
    let lowest = min_eigenvalue(m);
    if lowest < -tol.psd_floor * scale {
        return Err(Error::NotPositiveSemidefinite(lowest));
    }
    // iΩm is similar to i·√m Ω √m, which is Hermitian.
    let root = spectral_map(m, |v| libm::sqrt(v.max(0.0)));
    let k = &root * symplectic_form(modes) * &root;
    let hermitian = to_complex(&DMatrix::zeros(2 * modes, 2 * modes), &k);
    let mut moduli: Vec<f64> = hermitian
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v.abs())
        .collect();
    moduli.sort_by(f64::total_cmp);
    moduli
        .chunks(2)
        .map(|pair| {
            let (a, b) = (pair[0], pair[1]);
            if (a - b).abs() > tol.pair_agreement * b.max(1.0) {
                Err(Error::UnpairedSpectrum(a, b))
            } else {
                Ok(0.5 * (a + b))
            }
        })
        .collect()
}

/// `str[M]`, the sum of the symplectic eigenvalues.
pub fn symplectic_trace(m: &DMatrix<f64>) -> Result<f64> {
    Ok(symplectic_eigenvalues(m)?.iter().sum())
}

/// Williamson decomposition of a symmetric positive-definite matrix.
///
/// With `A = M^{-1/2} Ω M^{-1/2}` antisymmetric, the eigenvectors `z = x + iy`
/// of the Hermitian `iA` for eigenvalue `a > 0` give the real canonical pair
/// `(√2 y, √2 x)` with `A x = a y`, `A y = -a x`. Collecting those pairs into an
/// orthogonal `O` yields `S = D^{1/2} Oᵀ M^{-1/2}` with `s = 1/a`.
pub fn williamson(m: &DMatrix<f64>) -> Result<WilliamsonForm> {
    let tol = Tolerances::default();
    let modes = phase_space_modes(m)?;
    check_symmetric(m, tol.symmetry)?;
    let lowest = min_eigenvalue(m);
    if !(lowest > tol.strict_positive) {
        return Err(Error::NotPositiveDefinite(lowest));
    }
    let dim = 2 * modes;
    let inv_root = spectral_map(m, |v| 1.0 / libm::sqrt(v));
    let a = &inv_root * symplectic_form(modes) * &inv_root;
    let eig = to_complex(&DMatrix::zeros(dim, dim), &a).symmetric_eigen();

    let mut positive: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] > 0.0).collect();
    positive.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    if positive.len() != modes {
        return Err(Error::UnpairedSpectrum(
            positive.len() as f64,
            modes as f64,
        ));
    }

    let mut basis = DMatrix::zeros(dim, dim);
    let mut eigenvalues = Vec::with_capacity(modes);
    let sqrt2 = core::f64::consts::SQRT_2;
    for (k, &idx) in positive.iter().enumerate() {
        let z = eig.eigenvectors.column(idx);
        for r in 0..dim {
            basis[(r, 2 * k)] = sqrt2 * z[r].im;
            basis[(r, 2 * k + 1)] = sqrt2 * z[r].re;
        }
        eigenvalues.push(1.0 / eig.eigenvalues[idx]);
    }

    let mut s = basis.transpose() * inv_root;
    for k in 0..modes {
        let root = libm::sqrt(eigenvalues[k]);
        s.row_mut(2 * k).scale_mut(root);
        s.row_mut(2 * k + 1).scale_mut(root);
    }
    Ok(WilliamsonForm {
        symplectic: SymplecticMatrix::new_unchecked(s),
        eigenvalues,
    })
}

/// Schur complement `γ_B - γ₁₂ᵀ γ_A⁻¹ γ₁₂` of the Alice block.
///
/// A nearly singular `γ_A` is rejected rather than pseudo-inverted.
pub fn schur_complement(gamma: &CovarianceMatrix, part: &Partition) -> Result<DMatrix<f64>> {
    part.check_dim(gamma.dim())?;
    let m = gamma.entries();
    let ga = part.alice_block(m);
    let lowest = min_eigenvalue(&ga);
    if !(lowest > Tolerances::default().strict_positive) {
        return Err(Error::NotPositiveDefinite(lowest));
    }
    let chol = ga
        .cholesky()
        .ok_or(Error::NotPositiveDefinite(lowest))?;
    let g12 = part.cross_block(m);
    let solved = chol.solve(&g12);
    Ok(symmetrize(&(part.bob_block(m) - g12.transpose() * solved)))
}
