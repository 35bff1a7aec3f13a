//! Named Gaussian state families and random covariance matrices.

use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::{CovarianceMatrix, Partition, SymplecticMatrix};
use crate::linalg::symmetrize;

/// Two-mode squeezed vacuum with squeezing `r`.
pub fn squeezed_vacuum_cm(r: f64) -> Result<CovarianceMatrix> {
    if !r.is_finite() {
        return Err(invalid("squeezing", "must be finite"));
    }
    let (c, s) = (libm::cosh(2.0 * r), libm::sinh(2.0 * r));
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        c, 0.0, s, 0.0,
        0.0, c, 0.0, -s,
        s, 0.0, c, 0.0,
        0.0, -s, 0.0, c,
    ]);
    CovarianceMatrix::new(m)
}

/// `ν = 2n + 1` for mean thermal photon number `n`.
pub fn nu_from_photon_number(n: f64) -> f64 {
    2.0 * n + 1.0
}

/// Thermal state `diag(ν₁, ν₁, …, ν_N, ν_N)`.
pub fn thermal_cm(nus: &[f64]) -> Result<CovarianceMatrix> {
    if nus.is_empty() {
        return Err(invalid("thermal spectrum", "needs at least one mode"));
    }
    if let Some(bad) = nus.iter().find(|&&v| !(v >= 1.0) || !v.is_finite()) {
        return Err(invalid(
            "thermal spectrum",
            alloc::format!("symplectic eigenvalue {bad} is below 1"),
        ));
    }
    let n = nus.len();
    let m = DMatrix::from_fn(2 * n, 2 * n, |i, j| if i == j { nus[i / 2] } else { 0.0 });
    CovarianceMatrix::new(m)
}

/// Parameters of the symmetric three-mode GHZ-like state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhzParams {
    pub a: f64,
}

impl GhzParams {
    pub fn new(a: f64) -> Result<Self> {
        if !(a >= 1.0) || !a.is_finite() {
            return Err(invalid("ghz parameter a", "must be a finite value ≥ 1"));
        }
        Ok(Self { a })
    }

    /// From the momentum and position squeezing of the three input beams.
    pub fn from_squeezing(r_m: f64, r_p: f64) -> Result<Self> {
        let a = libm::sqrt(4.0 * libm::cosh(2.0 * (r_m + r_p)) + 5.0) / 3.0;
        Self::new(a)
    }

    fn root(&self) -> f64 {
        libm::sqrt(9.0 * self.a * self.a - 8.0)
    }

    pub fn b(&self) -> f64 {
        (5.0 * self.a - self.root()) / 4.0
    }

    pub fn c(&self) -> f64 {
        (self.a - self.root()) / 4.0
    }
}

/// Three-mode GHZ-like covariance matrix; pure for every `a ≥ 1`.
pub fn ghz_cm(params: &GhzParams) -> Result<CovarianceMatrix> {
    let params = GhzParams::new(params.a)?;
    let (a, b, c) = (params.a, params.b(), params.c());
    let m = DMatrix::from_fn(6, 6, |i, j| {
        let (mi, qi) = (i / 2, i % 2);
        let (mj, qj) = (j / 2, j % 2);
        match (qi == qj, mi == mj, qi) {
            (true, true, 0) => a,
            (true, true, _) => b,
            (true, false, 0) => c,
            (true, false, _) => -c,
            _ => 0.0,
        }
    });
    CovarianceMatrix::new(m)
}

/// Haar-random `n×n` unitary: QR of a complex Ginibre matrix with the phases
/// of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex<f64>> {
    let scale = core::f64::consts::FRAC_1_SQRT_2;
    let g = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex::new(re * scale, im * scale)
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let norm = libm::hypot(d.re, d.im);
        let phase = if norm > 0.0 { d / norm } else { Complex::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Orthogonal symplectic matrix `[[X, Y], [-Y, X]]` for `U = X - iY`,
/// permuted from `(x…x, p…p)` block ordering into interleaved ordering.
pub fn orthogonal_symplectic_from_unitary(u: &DMatrix<Complex<f64>>) -> Result<SymplecticMatrix> {
    if u.ncols() != u.nrows() || u.nrows() == 0 {
        return Err(Error::NotPhaseSpace {
            rows: u.nrows(),
            cols: u.ncols(),
        });
    }
    SymplecticMatrix::new(interleaved_block_form(u))
}

fn interleaved_block_form(u: &DMatrix<Complex<f64>>) -> DMatrix<f64> {
    let n = u.nrows();
    let block = |row: usize, col: usize| -> f64 {
        let (bi, i) = (row / n, row % n);
        let (bj, j) = (col / n, col % n);
        let x = u[(i, j)].re;
        let y = -u[(i, j)].im;
        match (bi, bj) {
            (0, 0) | (1, 1) => x,
            (0, 1) => y,
            _ => -y,
        }
    };
    DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let (mode_r, quad_r) = (r / 2, r % 2);
        let (mode_c, quad_c) = (c / 2, c % 2);
        block(quad_r * n + mode_r, quad_c * n + mode_c)
    })
}

pub fn random_orthogonal_symplectic<R: Rng + ?Sized>(
    n_modes: usize,
    rng: &mut R,
) -> SymplecticMatrix {
    SymplecticMatrix::new_unchecked(interleaved_block_form(&haar_unitary(n_modes, rng)))
}

/// Single-mode squeezers `⊕ diag(e^{-rᵢ}, e^{rᵢ})`.
pub fn squeezer(rs: &[f64]) -> SymplecticMatrix {
    let n = rs.len();
    let m = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i != j {
            0.0
        } else if i % 2 == 0 {
            libm::exp(-rs[i / 2])
        } else {
            libm::exp(rs[i / 2])
        }
    });
    SymplecticMatrix::new_unchecked(m)
}

/// `K (⊕ S(rᵢ)) L` with independent Haar orthogonal symplectics and
/// `rᵢ ~ U[0, r_max]`.
pub fn random_symplectic<R: Rng + ?Sized>(
    n_modes: usize,
    r_max: f64,
    rng: &mut R,
) -> Result<SymplecticMatrix> {
    if !(r_max >= 0.0) || !r_max.is_finite() {
        return Err(invalid("r_max", "must be finite and non-negative"));
    }
    let k = random_orthogonal_symplectic(n_modes, rng);
    let rs: Vec<f64> = (0..n_modes).map(|_| rng.random::<f64>() * r_max).collect();
    let l = random_orthogonal_symplectic(n_modes, rng);
    Ok(k.compose(&squeezer(&rs)).compose(&l))
}

/// Generation parameters for `γ = S γ_th Sᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomCmConfig {
    pub n_modes: usize,
    /// Upper end of the thermal symplectic eigenvalue interval `[1, nu_max]`.
    pub nu_max: f64,
    pub r_max: f64,
    pub seed: u64,
}

impl RandomCmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(invalid("n_modes", "must be positive"));
        }
        if !(self.nu_max >= 1.0) || !self.nu_max.is_finite() {
            return Err(invalid("nu_max", "must be finite and ≥ 1"));
        }
        if !(self.r_max >= 0.0) || !self.r_max.is_finite() {
            return Err(invalid("r_max", "must be finite and ≥ 0"));
        }
        Ok(())
    }
}

/// Random physical covariance matrix together with its drawn thermal spectrum.
pub fn random_cm_with_spectrum<R: Rng + ?Sized>(
    config: &RandomCmConfig,
    rng: &mut R,
) -> Result<(CovarianceMatrix, Vec<f64>)> {
    config.validate()?;
    let nus: Vec<f64> = (0..config.n_modes)
        .map(|_| 1.0 + rng.random::<f64>() * (config.nu_max - 1.0))
        .collect();
    let s = random_symplectic(config.n_modes, config.r_max, rng)?;
    let cm = thermal_cm(&nus)?.transformed(&s)?;
    Ok((cm, nus))
}

pub fn random_cm<R: Rng + ?Sized>(config: &RandomCmConfig, rng: &mut R) -> Result<CovarianceMatrix> {
    Ok(random_cm_with_spectrum(config, rng)?.0)
}

/// Offset on Alice's diagonal in [`random_nonsteerable_cm`].
pub const NONSTEERABLE_ALICE_OFFSET: f64 = 1.0;

/// Draws `0_A ⊕ σ_B + P` with `σ_B` physical and `P = GGᵀ + δ(I_A ⊕ 0)`.
///
/// With `δ = 1` the Alice block satisfies `P_A + iΩ_A ⪰ 0`, so the result is a
/// physical covariance matrix as well as a member of the non-steerable set.
pub fn random_nonsteerable_cm<R: Rng + ?Sized>(
    part: &Partition,
    rng: &mut R,
) -> Result<CovarianceMatrix> {
    let bob = random_cm(
        &RandomCmConfig {
            n_modes: part.n_bob,
            nu_max: 3.0,
            r_max: 1.0,
            seed: 0,
        },
        rng,
    )?;
    let dim = 2 * part.modes();
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        0.5 * v
    });
    let mut p = &g * g.transpose();
    for i in 0..part.alice_dim() {
        p[(i, i)] += NONSTEERABLE_ALICE_OFFSET;
    }
    CovarianceMatrix::new(symmetrize(&(part.embed_bob(bob.entries()) + p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{is_physical_cm, symplectic_eigenvalues, symplectic_form};
    use crate::linalg::max_abs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn squeezed_vacuum_values() {
        assert_eq!(squeezed_vacuum_cm(0.0).unwrap().entries(), &DMatrix::identity(4, 4));
        let g = squeezed_vacuum_cm(1.0).unwrap();
        assert!((g.entries()[(0, 0)] - 3.762_195_691_083_631).abs() < 1e-12);
        assert!((g.entries()[(0, 2)] - 3.626_860_407_847_019).abs() < 1e-12);
        assert!((g.entries()[(1, 3)] + 3.626_860_407_847_019).abs() < 1e-12);
        assert!(squeezed_vacuum_cm(f64::NAN).is_err());
        for r in [0.0, 0.3, 1.0, 2.5] {
            assert!(squeezed_vacuum_cm(r).unwrap().is_physical(1e-9));
        }
    }

    #[test]
    fn thermal_values() {
        assert_eq!(thermal_cm(&[1.0]).unwrap().entries(), &DMatrix::identity(2, 2));
        let t = thermal_cm(&[3.0, 1.5]).unwrap();
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(alloc::vec![
            3.0, 3.0, 1.5, 1.5
        ]));
        assert_eq!(t.entries(), &expected);
        assert!(thermal_cm(&[0.9]).is_err());
        assert_eq!(nu_from_photon_number(0.5), 2.0);
    }

    #[test]
    fn ghz_parameters() {
        let p = GhzParams::new(1.0).unwrap();
        assert!((p.b() - 1.0).abs() < 1e-15 && p.c().abs() < 1e-15);
        assert_eq!(ghz_cm(&p).unwrap().entries(), &DMatrix::identity(6, 6));
        let p = GhzParams::new(2.0).unwrap();
        let root28 = libm::sqrt(28.0);
        assert!((p.b() - (10.0 - root28) / 4.0).abs() < 1e-15);
        assert!((p.b() - 1.177_124_344_467_705).abs() < 1e-12);
        assert!((p.c() - (-0.822_875_655_532_295)).abs() < 1e-12);
        assert!((GhzParams::from_squeezing(0.0, 0.0).unwrap().a - 1.0).abs() < 1e-15);
        assert!(GhzParams::new(0.5).is_err());
        for a in [1.0, 2.0, 5.0, 26.0] {
            let g = ghz_cm(&GhzParams::new(a).unwrap()).unwrap();
            assert!(g.is_physical(1e-9));
            let s = symplectic_eigenvalues(g.entries()).unwrap();
            assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-8), "a={a}: {s:?}");
        }
    }

    #[test]
    fn unitary_identity_maps_to_identity() {
        let u = DMatrix::<Complex<f64>>::identity(3, 3);
        let s = orthogonal_symplectic_from_unitary(&u).unwrap();
        assert_eq!(s.matrix(), &DMatrix::identity(6, 6));
    }

    #[test]
    fn phase_is_a_rotation() {
        let alpha = 0.7f64;
        let u = DMatrix::from_element(1, 1, Complex::new(alpha.cos(), alpha.sin()));
        let s = orthogonal_symplectic_from_unitary(&u).unwrap();
        let rot = DMatrix::from_row_slice(2, 2, &[alpha.cos(), -alpha.sin(), alpha.sin(), alpha.cos()]);
        assert!(max_abs(&(s.matrix() - rot)) < 1e-15);
    }

    #[test]
    fn random_draws_are_orthogonal_and_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            for _ in 0..50 {
                let s = random_orthogonal_symplectic(n, &mut rng);
                assert!(s.defect() <= 1e-10);
                let sst = s.matrix() * s.matrix().transpose();
                assert!(max_abs(&(sst - DMatrix::identity(2 * n, 2 * n))) < 1e-10);

                let t = random_symplectic(n, 2.0, &mut rng).unwrap();
                assert!(t.defect() <= 1e-10);
                let omega = symplectic_form(n);
                assert!(max_abs(&(t.matrix() * &omega * t.matrix().transpose() - omega)) <= 1e-10);
            }
        }
    }

    #[test]
    fn zero_squeezing_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_symplectic(2, 0.0, &mut rng).unwrap();
        let sst = s.matrix() * s.matrix().transpose();
        assert!(max_abs(&(sst - DMatrix::identity(4, 4))) < 1e-12);
        assert!(random_symplectic(2, -1.0, &mut rng).is_err());
    }

    #[test]
    fn random_cm_trivial_and_deterministic() {
        let cfg = RandomCmConfig { n_modes: 2, nu_max: 1.0, r_max: 0.0, seed: 3 };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let g = random_cm(&cfg, &mut rng).unwrap();
        assert!(max_abs(&(g.entries() - DMatrix::identity(4, 4))) < 1e-12);

        let cfg = RandomCmConfig { n_modes: 2, nu_max: 5.0, r_max: 2.0, seed: 9 };
        let a = random_cm(&cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).unwrap();
        let b = random_cm(&cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).unwrap();
        assert_eq!(a, b);
        assert!(is_physical_cm(a.entries(), 1e-9).unwrap());
    }

    #[test]
    fn random_cm_keeps_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 1..=3 {
            let cfg = RandomCmConfig { n_modes: n, nu_max: 5.0, r_max: 2.0, seed: 0 };
            for _ in 0..30 {
                let (g, mut nus) = random_cm_with_spectrum(&cfg, &mut rng).unwrap();
                assert!(g.is_physical(1e-9));
                nus.sort_by(f64::total_cmp);
                let s = symplectic_eigenvalues(g.entries()).unwrap();
                for (x, y) in s.iter().zip(&nus) {
                    assert!((x - y).abs() < 1e-8, "{s:?} vs {nus:?}");
                }
            }
        }
    }

    #[test]
    fn nonsteerable_draws_are_physical() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (na, nb) in [(1, 1), (1, 2), (2, 1)] {
            let part = Partition::new(na, nb).unwrap();
            for _ in 0..30 {
                let g = random_nonsteerable_cm(&part, &mut rng).unwrap();
                assert!(g.is_physical(1e-9));
            }
        }
    }
}
