//! Microwave observables of the atom in the line: complex transmission
//! `t`, reflection `r = t − 1`, power transmission `T = |t|²` and the
//! normalized polarizability `α = i(1 − t)`.

use thiserror::Error;

use crate::atom::{AtomSpec, DriveSpec};
use crate::scalar::{c, i_unit, re, Cplx, Real, HBAR};
use crate::solver::{steady_state, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScatteringError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("probe amplitude is zero; transmission from the coherence is undefined")]
    ZeroProbe,
    #[error("transmission denominator vanishes (pole of the weak-probe formula)")]
    DegenerateDenominator,
}

/// Scattering amplitudes at the probe frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatteringPoint<T: Real> {
    pub t: Cplx<T>,
    pub r: Cplx<T>,
    /// Power transmission `|t|²`, not clamped.
    pub power: T,
    pub alpha: Cplx<T>,
}

impl<T: Real> ScatteringPoint<T> {
    pub fn from_transmission(t: Cplx<T>) -> Self {
        let one = re(T::one());
        Self { t, r: t - one, power: t.norm_sqr(), alpha: i_unit::<T>() * (one - t) }
    }

    /// Reflected power `|r|²`.
    pub fn reflected_power(&self) -> T {
        self.r.norm_sqr()
    }
}

/// Transmission from the stationary coherence of the full master equation,
/// `t = 1 + iΓ₂₁ρ₂₁/Ω_p`. Valid at any probe power, so it includes
/// saturation of the probe transition.
pub fn transmission_numeric<T: Real>(
    atom: &AtomSpec<T>,
    drive: &DriveSpec<T>,
) -> Result<ScatteringPoint<T>, ScatteringError> {
    if !(drive.omega_p_rabi > T::zero()) {
        return Err(ScatteringError::ZeroProbe);
    }
    if atom.gamma_rel_21 == T::zero() {
        // No radiative coupling: the atom does not scatter.
        return Ok(ScatteringPoint::from_transmission(re(T::one())));
    }
    let rho = steady_state(atom, drive)?;
    let rho21 = rho.get(2, 1);
    let t = re(T::one()) + i_unit::<T>() * rho21 * (atom.gamma_rel_21 / drive.omega_p_rabi);
    Ok(ScatteringPoint::from_transmission(t))
}

/// Closed-form weak-probe transmission
/// `t = 1 − Γ₂₁ / [2(γ₂₁ − iδω_p) + Ω_c² / (2(γ₃₁ − iδω_p − iδω_c))]`.
/// The probe amplitude is ignored.
pub fn transmission_weak_probe<T: Real>(
    atom: &AtomSpec<T>,
    drive: &DriveSpec<T>,
) -> Result<ScatteringPoint<T>, ScatteringError> {
    weak_probe_t(
        atom.gamma_rel_21,
        atom.gamma_deph_21,
        atom.gamma_deph_31,
        drive.omega_c_rabi,
        drive.delta_p,
        drive.delta_c,
    )
    .map(ScatteringPoint::from_transmission)
}

/// Scalar form of the weak-probe transmission, shared with the fitter.
pub fn weak_probe_t<T: Real>(
    gamma_rel_21: T,
    gamma_deph_21: T,
    gamma_deph_31: T,
    omega_c: T,
    delta_p: T,
    delta_c: T,
) -> Result<Cplx<T>, ScatteringError> {
    let two = T::lit(2.0);
    if gamma_rel_21 == T::zero() {
        return Ok(re(T::one()));
    }
    let mut denom = c(two * gamma_deph_21, -two * delta_p);
    if omega_c != T::zero() {
        let inner = c(two * gamma_deph_31, -two * (delta_p + delta_c));
        if inner.norm() == T::zero() {
            return Err(ScatteringError::DegenerateDenominator);
        }
        denom = denom + re(omega_c * omega_c) / inner;
    }
    if denom.norm() == T::zero() {
        return Err(ScatteringError::DegenerateDenominator);
    }
    Ok(re(T::one()) - re(gamma_rel_21) / denom)
}

/// Resonant power transmission without pure dephasing on the probe
/// transition: `T = (Ω_c² / (2Γ₂₁γ₃₁ + Ω_c²))²`.
pub fn power_transmission_ideal<T: Real>(omega_c: T, gamma_rel_21: T, gamma_deph_31: T) -> Result<T, ScatteringError> {
    let oc2 = omega_c * omega_c;
    let denom = T::lit(2.0) * gamma_rel_21 * gamma_deph_31 + oc2;
    if !(denom > T::zero()) {
        return Err(ScatteringError::DegenerateDenominator);
    }
    let ratio = oc2 / denom;
    Ok(ratio * ratio)
}

/// Radiative rate into the line, `Γ₂₁ = ω₂₁(M·i_PC)²/(ħZ)`.
pub fn coupling_to_rate<T: Real>(mutual_inductance: T, persistent_current: T, omega21: T, line_impedance: T) -> T {
    let flux = mutual_inductance * persistent_current;
    // ħ is divided out in two stages to stay inside f32 range.
    let hbar_sqrt = T::lit(HBAR.sqrt());
    let x = flux / hbar_sqrt;
    omega21 * x * x / line_impedance
}

/// Mutual inductance that produces radiative rate `gamma_rel_21`.
pub fn rate_to_coupling<T: Real>(gamma_rel_21: T, persistent_current: T, omega21: T, line_impedance: T) -> T {
    let hbar_sqrt = T::lit(HBAR.sqrt());
    (gamma_rel_21 * line_impedance / omega21).sqrt() * hbar_sqrt / persistent_current
}
