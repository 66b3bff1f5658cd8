//! Density matrix of the three-level atom.

use thiserror::Error;

use crate::matrix::Operator;
use crate::scalar::{Cplx, Real};

/// Tolerances of the physical-state check, nominal `f64` values.
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum StateError {
    #[error("density matrix not Hermitian (max |ρ − ρ†| = {0:e})")]
    NotHermitian(f64),
    #[error("density matrix trace {0} differs from 1")]
    TraceNotUnity(f64),
    #[error("density matrix has negative eigenvalue {0:e}")]
    NotPositive(f64),
}

/// Hermitian, unit-trace, positive semidefinite 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix<T: Real>(Operator<T>);

impl<T: Real> DensityMatrix<T> {
    /// Validates `rho` against the state invariants.
    pub fn new(rho: Operator<T>) -> Result<Self, StateError> {
        check_state(&rho, T::tol(POSITIVITY_TOL))?;
        Ok(Self(rho))
    }

    /// Wraps `rho` without checking; the caller guarantees validity.
    pub(crate) fn new_unchecked(rho: Operator<T>) -> Self {
        Self(rho)
    }

    /// Pure level `|n⟩⟨n|`, `n ∈ 1..=3`.
    pub fn level(n: usize) -> Self {
        assert!((1..=3).contains(&n), "level {n} out of range 1..=3");
        Self(Operator::sigma(n, n))
    }

    pub fn ground() -> Self {
        Self::level(1)
    }

    pub fn operator(&self) -> &Operator<T> {
        &self.0
    }

    pub fn into_operator(self) -> Operator<T> {
        self.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Cplx<T> {
        self.0.get(i, j)
    }

    /// `[ρ₁₁, ρ₂₂, ρ₃₃]`.
    pub fn populations(&self) -> [T; 3] {
        [self.0.get(1, 1).re, self.0.get(2, 2).re, self.0.get(3, 3).re]
    }

    pub fn eigenvalues(&self) -> [T; 3] {
        self.0.hermitian_eigenvalues()
    }

    pub fn check(&self) -> Result<(), StateError> {
        check_state(&self.0, T::tol(POSITIVITY_TOL))
    }
}

/// Hermiticity, trace and positivity check with an explicit eigenvalue floor.
pub(crate) fn check_state<T: Real>(rho: &Operator<T>, eig_floor: T) -> Result<(), StateError> {
    let defect = rho.hermiticity_defect();
    if !(defect <= T::tol(HERMITIAN_TOL)) {
        return Err(StateError::NotHermitian(defect.to_f64_lossy()));
    }
    let tr = rho.trace();
    if !((tr.re - T::one()).abs() < T::tol(TRACE_TOL) && tr.im.abs() < T::tol(TRACE_TOL)) {
        return Err(StateError::TraceNotUnity(tr.re.to_f64_lossy()));
    }
    let min_eig = rho.hermitian_eigenvalues()[0];
    if !(min_eig >= -eig_floor) {
        return Err(StateError::NotPositive(min_eig.to_f64_lossy()));
    }
    Ok(())
}
