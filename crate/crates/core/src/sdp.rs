//! Small dense primal-dual interior-point solver for
//!
//! ```text
//! minimize  cᵀx   subject to   F(x) = F₀ + Σⱼ xⱼ Fⱼ ⪰ 0
//! ```
//!
//! where every `Fⱼ` is block diagonal. The dual is
//! `maximize −F₀•Y` over `Y ⪰ 0` with `Fⱼ•Y = cⱼ`. Iterates stay strictly
//! primal feasible, so any returned `x` satisfies the constraints exactly
//! up to rounding; the dual starts infeasible and is driven to feasibility
//! with HKM search directions and a Mehrotra corrector.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{frobenius, min_eigenvalue, symmetrize};

/// Block-diagonal linear matrix inequality with a linear objective.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    objective: DVector<f64>,
    offset: Vec<DMatrix<f64>>,
    coefficients: Vec<Vec<DMatrix<f64>>>,
}

impl LmiProblem {
    /// `coefficients[j][b]` is block `b` of `Fⱼ`; `offset[b]` is block `b`
    /// of `F₀`.
    pub fn new(
        objective: DVector<f64>,
        offset: Vec<DMatrix<f64>>,
        coefficients: Vec<Vec<DMatrix<f64>>>,
    ) -> Result<Self> {
        if objective.len() != coefficients.len() || objective.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: coefficients.len(),
                found: objective.len(),
            });
        }
        for block in &offset {
            if block.nrows() != block.ncols() || block.nrows() == 0 {
                return Err(invalid("lmi block", "blocks must be square and non-empty"));
            }
        }
        for f in &coefficients {
            if f.len() != offset.len() {
                return Err(Error::DimensionMismatch { expected: offset.len(), found: f.len() });
            }
            for (blk, off) in f.iter().zip(&offset) {
                if blk.shape() != off.shape() {
                    return Err(Error::DimensionMismatch { expected: off.nrows(), found: blk.nrows() });
                }
            }
        }
        if objective.iter().any(|v| !v.is_finite()) {
            return Err(invalid("objective", "non-finite entry"));
        }
        Ok(Self { objective, offset, coefficients })
    }

    pub fn variables(&self) -> usize {
        self.objective.len()
    }

    /// `F(x)` block by block.
    pub fn evaluate(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out = self.offset.clone();
        for (xj, f) in x.iter().zip(&self.coefficients) {
            for (o, fb) in out.iter_mut().zip(f) {
                *o += fb * *xj;
            }
        }
        out
    }

    fn combine(&self, dx: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<_> = self.offset.iter().map(|b| DMatrix::zeros(b.nrows(), b.ncols())).collect();
        for (dj, f) in dx.iter().zip(&self.coefficients) {
            for (o, fb) in out.iter_mut().zip(f) {
                *o += fb * *dj;
            }
        }
        out
    }

    fn total_dim(&self) -> usize {
        self.offset.iter().map(|b| b.nrows()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdpSettings {
    pub max_iterations: usize,
    /// Relative duality gap target.
    pub gap_tolerance: f64,
    /// Relative dual infeasibility target.
    pub feasibility_tolerance: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Scale of the initial dual matrix `Y₀ = s·I`.
    pub initial_dual_scale: f64,
    /// Iterates with `‖x‖∞` or `−cᵀx` beyond this are declared unbounded.
    pub divergence_limit: f64,
    /// Accuracy accepted when the strict targets cannot be reached.
    pub near_optimal_tolerance: f64,
    /// Iterations without improving on the best acceptable iterate before
    /// giving up.
    pub stall_iterations: usize,
    /// Start the dual at `μ S₀⁻¹` rather than at a multiple of the identity.
    pub centred_start: bool,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gap_tolerance: 1e-9,
            feasibility_tolerance: 1e-9,
            step_fraction: 0.95,
            initial_dual_scale: 1.0,
            divergence_limit: 1e12,
            near_optimal_tolerance: 1e-6,
            stall_iterations: 20,
            centred_start: false,
        }
    }
}

impl SdpSettings {
    /// Perturbed settings used when a first attempt fails.
    pub fn jittered(&self) -> Self {
        Self {
            max_iterations: self.max_iterations * 2,
            step_fraction: 0.8,
            initial_dual_scale: self.initial_dual_scale * 10.0,
            centred_start: !self.centred_start,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    /// Strict targets missed, but gap and dual infeasibility are within
    /// `near_optimal_tolerance`.
    NearOptimal,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub x: DVector<f64>,
    pub dual: Vec<DMatrix<f64>>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub iterations: usize,
    pub relative_gap: f64,
    pub dual_infeasibility: f64,
}

enum SchurSolver {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SchurSolver {
    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let out = match self {
            Self::Cholesky(c) => c.solve(rhs),
            Self::Lu(l) => l.solve(rhs)?,
        };
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}

fn cholesky_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    symmetrize(m).cholesky().map(|c| symmetrize(&c.inverse()))
}

/// Largest `α` with `X + α dX ⪰ 0` (infinite if every direction is safe).
fn step_to_boundary(x: &[DMatrix<f64>], dx: &[DMatrix<f64>]) -> Option<f64> {
    let mut alpha = f64::INFINITY;
    for (xb, db) in x.iter().zip(dx) {
        let chol = symmetrize(xb).cholesky()?;
        let l = chol.l();
        let half = l.solve_lower_triangular(db)?;
        let whitened = l.solve_lower_triangular(&half.transpose())?;
        let lambda = min_eigenvalue(&whitened);
        if lambda < 0.0 {
            alpha = alpha.min(-1.0 / lambda);
        }
    }
    Some(alpha)
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| frobenius(x, y)).sum()
}

/// Solves the LMI problem from a strictly feasible starting point `x0`.
pub fn solve_lmi(problem: &LmiProblem, x0: &DVector<f64>, settings: &SdpSettings) -> Result<SdpSolution> {
    if x0.len() != problem.variables() {
        return Err(Error::DimensionMismatch { expected: problem.variables(), found: x0.len() });
    }
    let c = &problem.objective;
    let k = c.len();
    let n = problem.total_dim() as f64;
    let mut x = x0.clone();
    let mut s = problem.evaluate(&x);
    let mut s_inv: Vec<DMatrix<f64>> = s
        .iter()
        .map(cholesky_inverse)
        .collect::<Option<_>>()
        .ok_or_else(|| invalid("starting point", "not strictly feasible"))?;
    let mut y: Vec<DMatrix<f64>> = if settings.centred_start {
        // `μ` fitted so that `Fⱼ•Y₀ ≈ cⱼ` in the least-squares sense.
        let f0 = DVector::from_iterator(k, problem.coefficients.iter().map(|f| inner(f, &s_inv)));
        let fit = c.dot(&f0) / f0.norm_squared();
        let mu = if fit.is_finite() && fit > 0.0 { fit } else { 1.0 };
        s_inv.iter().map(|b| b * (mu * settings.initial_dual_scale)).collect()
    } else {
        // Sized to the objective: `Fⱼ•Y₀` comparable with `cⱼ`.
        let scale = problem
            .coefficients
            .iter()
            .zip(c.iter())
            .map(|(f, cj)| (1.0 + cj.abs()) / (1.0 + f.iter().map(|b| b.trace().abs()).sum::<f64>()))
            .fold(1.0, f64::max)
            * settings.initial_dual_scale;
        problem.offset.iter().map(|b| DMatrix::identity(b.nrows(), b.ncols()) * scale).collect()
    };
    let c_norm = c.norm();

    let finish = |status, x: DVector<f64>, y: Vec<DMatrix<f64>>, it, gap, dinf| {
        let primal_value = c.dot(&x);
        let dual_value = -inner(&problem.offset, &y);
        SdpSolution { status, x, dual: y, primal_value, dual_value, iterations: it, relative_gap: gap, dual_infeasibility: dinf }
    };

    let mut stop = SdpStatus::IterationLimit;
    let mut last = (0, f64::INFINITY, f64::INFINITY);
    let mut best: Option<(f64, DVector<f64>, Vec<DMatrix<f64>>, usize, f64, f64)> = None;
    let mut since_best = 0;
    for iter in 0..settings.max_iterations {
        let sy = inner(&s, &y);
        let mu = sy / n;
        let fy = DVector::from_iterator(k, problem.coefficients.iter().map(|f| inner(f, &y)));
        let objective = c.dot(&x);
        let gap = sy / (1.0 + objective.abs());
        let dinf = (c - &fy).norm() / (1.0 + c_norm);
        if gap <= settings.gap_tolerance && dinf <= settings.feasibility_tolerance {
            return Ok(finish(SdpStatus::Optimal, x, y, iter, gap, dinf));
        }
        if x.amax() > settings.divergence_limit || -objective > settings.divergence_limit {
            return Ok(finish(SdpStatus::Unbounded, x, y, iter, gap, dinf));
        }
        last = (iter, gap, dinf);
        let score = gap.max(dinf);
        if score <= settings.near_optimal_tolerance && best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, x.clone(), y.clone(), iter, gap, dinf));
            since_best = 0;
        } else if best.is_some() {
            since_best += 1;
            if since_best > settings.stall_iterations {
                break;
            }
        }

        // Schur complement M_ij = Tr[Fᵢ Y Fⱼ S⁻¹].
        let g: Vec<Vec<DMatrix<f64>>> = problem
            .coefficients
            .iter()
            .map(|f| f.iter().zip(&y).zip(&s_inv).map(|((fb, yb), sb)| yb * fb * sb).collect())
            .collect();
        let mut m = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = inner(&problem.coefficients[i], &g[j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        // Near the optimum M can lose definiteness to rounding; LU still
        // gives a usable direction there.
        let system = match m.clone().cholesky() {
            Some(chol) => SchurSolver::Cholesky(chol),
            None => SchurSolver::Lu(m.lu()),
        };
        let f_sinv = DVector::from_iterator(k, problem.coefficients.iter().map(|f| inner(f, &s_inv)));

        let dual_step = |dx: &DVector<f64>, target: f64, extra: Option<&[DMatrix<f64>]>| {
            let ds = problem.combine(dx);
            let dy: Vec<DMatrix<f64>> = (0..s.len())
                .map(|b| {
                    let mut d = &s_inv[b] * target - &y[b] - &y[b] * &ds[b] * &s_inv[b];
                    if let Some(e) = extra {
                        d -= &e[b];
                    }
                    symmetrize(&d)
                })
                .collect();
            (ds, dy)
        };

        // Predictor.
        let Some(dx_aff) = system.solve(&(-c)) else {
            stop = SdpStatus::NumericalFailure;
            break;
        };
        let (ds_aff, dy_aff) = dual_step(&dx_aff, 0.0, None);
        let (Some(ap), Some(ad)) = (step_to_boundary(&s, &ds_aff), step_to_boundary(&y, &dy_aff)) else {
            stop = SdpStatus::NumericalFailure;
            break;
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let s_aff: Vec<_> = s.iter().zip(&ds_aff).map(|(a, d)| a + d * ap).collect();
        let y_aff: Vec<_> = y.iter().zip(&dy_aff).map(|(a, d)| a + d * ad).collect();
        let mu_aff = inner(&s_aff, &y_aff) / n;
        let ratio = (mu_aff / mu).clamp(0.0, 1.0);
        let sigma = ratio * ratio * ratio;

        // Corrector.
        let second: Vec<DMatrix<f64>> = (0..s.len()).map(|b| &dy_aff[b] * &ds_aff[b] * &s_inv[b]).collect();
        let f_second = DVector::from_iterator(k, problem.coefficients.iter().map(|f| inner(f, &second)));
        let rhs = &f_sinv * (sigma * mu) - c - f_second;
        let Some(dx) = system.solve(&rhs) else {
            stop = SdpStatus::NumericalFailure;
            break;
        };
        let (ds, dy) = dual_step(&dx, sigma * mu, Some(&second));
        let (Some(ap), Some(ad)) = (step_to_boundary(&s, &ds), step_to_boundary(&y, &dy)) else {
            stop = SdpStatus::NumericalFailure;
            break;
        };
        let mut ap = (settings.step_fraction * ap).min(1.0);
        let mut ad = (settings.step_fraction * ad).min(1.0);
        // While the dual is infeasible a long primal step alone only drives
        // x toward the far side of the feasible set.
        if dinf > settings.feasibility_tolerance {
            ap = ap.min(ad);
            ad = ap;
        }

        // Keep S = F(x) exact; shrink the step if rounding breaks definiteness.
        let mut accepted = None;
        for _ in 0..30 {
            let trial = &x + &dx * ap;
            let s_trial = problem.evaluate(&trial);
            if let Some(inv) = s_trial.iter().map(cholesky_inverse).collect::<Option<Vec<_>>>() {
                accepted = Some((trial, s_trial, inv));
                break;
            }
            ap *= 0.5;
        }
        let Some((nx, ns, ninv)) = accepted else {
            stop = SdpStatus::NumericalFailure;
            break;
        };
        let mut next_y = None;
        for _ in 0..30 {
            let trial: Vec<DMatrix<f64>> = y.iter().zip(&dy).map(|(yb, db)| yb + db * ad).collect();
            if trial.iter().all(|b| symmetrize(b).cholesky().is_some()) {
                next_y = Some(trial);
                break;
            }
            ad *= 0.5;
        }
        let Some(ny) = next_y else {
            stop = SdpStatus::NumericalFailure;
            break;
        };
        x = nx;
        s = ns;
        s_inv = ninv;
        y = ny;
    }
    // The strict targets were missed; fall back to the most accurate
    // primal-feasible iterate if it is close enough.
    if let Some((_, bx, by, it, gap, dinf)) = best {
        return Ok(finish(SdpStatus::NearOptimal, bx, by, it, gap, dinf));
    }
    let (it, gap, dinf) = last;
    Ok(finish(stop, x, y, it, gap, dinf))
}
