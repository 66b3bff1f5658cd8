//! Stationary state of the master equation from the vectorized Liouvillian,
//! and a fixed-step RK4 integrator used as an independent cross-check.

use thiserror::Error;

use crate::atom::{build_hamiltonian, master_rhs_with, off_diagonal_rates, AtomSpec, DriveSpec};
use crate::linalg::solve_complex;
use crate::matrix::{Operator, DIM};
use crate::scalar::{i_unit, re, Cplx, Real};
use crate::state::{check_state, DensityMatrix, StateError};

pub const VEC_DIM: usize = DIM * DIM;

/// Stability bound of the integrator: `step · max_rate ≤ STEP_SAFETY`.
pub const STEP_SAFETY: f64 = 0.05;

/// Eigenvalue floor below which the integrator reports lost positivity.
pub const EVOLVE_POSITIVITY_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("steady-state system is rank deficient at column {column} (degenerate parameters)")]
    SingularSystem { column: usize },
    #[error("step {step:e} s exceeds stability bound {bound:e} s")]
    StepTooLarge { step: f64, bound: f64 },
    #[error("positivity lost at t = {time:e} s (eigenvalue {eigenvalue:e})")]
    PositivityLost { time: f64, eigenvalue: f64 },
    #[error("invalid evolve configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("solution is not a physical state: {0}")]
    InvalidState(#[from] StateError),
}

/// 9×9 generator acting on the column-major vectorization of ρ (element
/// ρ_rc sits at index `r + 3c`, zero-based).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Liouvillian<T: Real> {
    m: [[Cplx<T>; VEC_DIM]; VEC_DIM],
}

#[inline]
fn vidx(i: usize, j: usize) -> usize {
    (i - 1) + DIM * (j - 1)
}

impl<T: Real> Liouvillian<T> {
    pub fn matrix(&self) -> &[[Cplx<T>; VEC_DIM]; VEC_DIM] {
        &self.m
    }

    pub fn apply_vec(&self, v: &[Cplx<T>; VEC_DIM]) -> [Cplx<T>; VEC_DIM] {
        let mut out = [re(T::zero()); VEC_DIM];
        for (o, row) in out.iter_mut().zip(self.m.iter()) {
            *o = row.iter().zip(v.iter()).fold(re(T::zero()), |acc, (a, b)| acc + *a * *b);
        }
        out
    }

    pub fn apply(&self, rho: &Operator<T>) -> Operator<T> {
        Operator::from_vec_col_major(&self.apply_vec(&rho.vec_col_major()))
    }
}

/// Vectorized master-equation generator.
///
/// Coherent part: `−i(I⊗H − Hᵀ⊗I)` from `vec(AXB) = (Bᵀ⊗A)vec(X)`; the
/// relaxation part is written entry by entry.
pub fn build_liouvillian<T: Real>(atom: &AtomSpec<T>, drive: &DriveSpec<T>) -> Liouvillian<T> {
    let h = build_hamiltonian(drive);
    let mi = -i_unit::<T>();
    let mut m = [[re(T::zero()); VEC_DIM]; VEC_DIM];
    for c in 0..DIM {
        for r in 0..DIM {
            let row = r + DIM * c;
            for c2 in 0..DIM {
                for r2 in 0..DIM {
                    let col = r2 + DIM * c2;
                    let mut v = re(T::zero());
                    if c == c2 {
                        v = v + h.at(r, r2);
                    }
                    if r == r2 {
                        v = v - h.at(c2, c);
                    }
                    m[row][col] = v * mi;
                }
            }
        }
    }
    let (p1, p2, p3) = (vidx(1, 1), vidx(2, 2), vidx(3, 3));
    m[p1][p2] = m[p1][p2] + atom.gamma_rel_21;
    m[p2][p2] = m[p2][p2] - atom.gamma_rel_21;
    m[p2][p3] = m[p2][p3] + atom.gamma_rel_32;
    m[p3][p3] = m[p3][p3] - atom.gamma_rel_32;
    for (i, j, g) in off_diagonal_rates(atom) {
        let k = vidx(i, j);
        m[k][k] = m[k][k] - g;
    }
    Liouvillian { m }
}

/// Common frequency scale used to make the linear system dimensionless.
fn frequency_scale<T: Real>(atom: &AtomSpec<T>, drive: &DriveSpec<T>) -> T {
    atom.max_rate().max(drive.max_scale())
}

/// Stationary solution of the master equation.
///
/// Solves the Liouvillian system with its first row (the ρ₁₁ equation)
/// replaced by the trace condition `ρ₁₁+ρ₂₂+ρ₃₃ = 1`. The system is first
/// divided by the largest rate or drive scale, which leaves the solution
/// unchanged and keeps the elimination well scaled.
pub fn steady_state<T: Real>(atom: &AtomSpec<T>, drive: &DriveSpec<T>) -> Result<DensityMatrix<T>, SolverError> {
    let scale = frequency_scale(atom, drive);
    if !(scale > T::zero()) || !scale.is_finite() {
        return Err(SolverError::SingularSystem { column: 0 });
    }
    let inv = T::one() / scale;
    let l = build_liouvillian(&atom.with_rates_scaled(inv), &drive.scaled(inv));
    let mut a = l.m;
    a[0] = [re(T::zero()); VEC_DIM];
    for k in [vidx(1, 1), vidx(2, 2), vidx(3, 3)] {
        a[0][k] = re(T::one());
    }
    let mut b = [re(T::zero()); VEC_DIM];
    b[0] = re(T::one());
    let threshold = T::epsilon() * T::lit(1e3);
    let x = solve_complex(a, b, threshold).map_err(|s| SolverError::SingularSystem { column: s.column })?;
    let rho = Operator::from_vec_col_major(&x).hermitian_part();
    check_state(&rho, T::tol(crate::state::POSITIVITY_TOL))?;
    Ok(DensityMatrix::new_unchecked(rho))
}

/// Fixed-step integration settings, seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveConfig<T: Real> {
    pub step: T,
    pub t_final: T,
}

impl<T: Real> EvolveConfig<T> {
    /// Largest step allowed for this atom and drive.
    pub fn max_step(atom: &AtomSpec<T>, drive: &DriveSpec<T>) -> T {
        let s = frequency_scale(atom, drive);
        if s > T::zero() {
            T::lit(STEP_SAFETY) / s
        } else {
            T::infinity()
        }
    }

    /// Config with the largest admissible step for `t_final`.
    pub fn auto(atom: &AtomSpec<T>, drive: &DriveSpec<T>, t_final: T) -> Self {
        let step = Self::max_step(atom, drive);
        let step = if step.is_finite() { step } else { t_final.max(T::min_positive_value()) };
        Self { step, t_final }
    }

    pub fn validate(&self, atom: &AtomSpec<T>, drive: &DriveSpec<T>) -> Result<(), SolverError> {
        if !(self.step > T::zero()) || !self.step.is_finite() {
            return Err(SolverError::InvalidConfig("step must be positive and finite"));
        }
        if !(self.t_final >= T::zero()) || !self.t_final.is_finite() {
            return Err(SolverError::InvalidConfig("t_final must be non-negative and finite"));
        }
        let bound = Self::max_step(atom, drive);
        if self.step > bound {
            return Err(SolverError::StepTooLarge { step: self.step.to_f64_lossy(), bound: bound.to_f64_lossy() });
        }
        Ok(())
    }

    /// Number of equal steps actually taken; the step is shortened so that
    /// they end exactly at `t_final`.
    pub fn step_count(&self) -> usize {
        if self.t_final == T::zero() {
            return 0;
        }
        (self.t_final / self.step).ceil().to_usize().unwrap_or(usize::MAX).max(1)
    }
}

/// Integrates the master equation from `rho0` to `cfg.t_final`.
pub fn evolve<T: Real>(
    atom: &AtomSpec<T>,
    drive: &DriveSpec<T>,
    rho0: &DensityMatrix<T>,
    cfg: &EvolveConfig<T>,
) -> Result<DensityMatrix<T>, SolverError> {
    evolve_observed(atom, drive, rho0, cfg, 0, |_, _| {})
}

/// [`evolve`], calling `observer(t, ρ)` at t = 0, after every `every`-th
/// step, and at the final time. `every = 0` only reports the end points.
pub fn evolve_observed<T: Real>(
    atom: &AtomSpec<T>,
    drive: &DriveSpec<T>,
    rho0: &DensityMatrix<T>,
    cfg: &EvolveConfig<T>,
    every: usize,
    mut observer: impl FnMut(T, &DensityMatrix<T>),
) -> Result<DensityMatrix<T>, SolverError> {
    cfg.validate(atom, drive)?;
    let n = cfg.step_count();
    let h_step = if n == 0 { T::zero() } else { cfg.t_final / T::from_usize(n).unwrap_or(T::one()) };
    let ham = build_hamiltonian(drive);
    let f = |rho: &Operator<T>| master_rhs_with(atom, &ham, rho);
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let floor = T::lit(EVOLVE_POSITIVITY_TOL);

    let mut rho = *rho0.operator();
    observer(T::zero(), rho0);
    for k in 1..=n {
        let k1 = f(&rho);
        let k2 = f(&(rho + k1.scale_real(h_step * half)));
        let k3 = f(&(rho + k2.scale_real(h_step * half)));
        let k4 = f(&(rho + k3.scale_real(h_step)));
        let incr = (k1 + k2.scale_real(T::lit(2.0)) + k3.scale_real(T::lit(2.0)) + k4).scale_real(h_step * sixth);
        rho = (rho + incr).hermitian_part();
        let t = h_step * T::from_usize(k).unwrap_or(T::zero());
        if !shifted_psd(&rho, floor) {
            let ev = rho.hermitian_eigenvalues()[0];
            if !(ev >= -floor) {
                return Err(SolverError::PositivityLost { time: t.to_f64_lossy(), eigenvalue: ev.to_f64_lossy() });
            }
        }
        if (every > 0 && k % every == 0) || k == n {
            observer(t, &DensityMatrix::new_unchecked(rho));
        }
    }
    Ok(DensityMatrix::new_unchecked(rho))
}

/// Sufficient-and-necessary PSD test of `ρ + shift·I` through its seven
/// principal minors (Hermitian input). Used as a cheap per-step screen.
fn shifted_psd<T: Real>(rho: &Operator<T>, shift: T) -> bool {
    let d = [rho.at(0, 0).re + shift, rho.at(1, 1).re + shift, rho.at(2, 2).re + shift];
    if d.iter().any(|x| !(*x >= T::zero())) {
        return false;
    }
    let m01 = d[0] * d[1] - rho.at(0, 1).norm_sqr();
    let m02 = d[0] * d[2] - rho.at(0, 2).norm_sqr();
    let m12 = d[1] * d[2] - rho.at(1, 2).norm_sqr();
    if m01 < T::zero() || m02 < T::zero() || m12 < T::zero() {
        return false;
    }
    let (a01, a02, a12) = (rho.at(0, 1), rho.at(0, 2), rho.at(1, 2));
    let det = d[0] * d[1] * d[2] + (a01 * a12 * a02.conj()).re * T::lit(2.0)
        - d[0] * a12.norm_sqr()
        - d[1] * a02.norm_sqr()
        - d[2] * a01.norm_sqr();
    det >= T::zero()
}
