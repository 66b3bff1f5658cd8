//! Physical parameter records of the ladder atom and the generator of its
//! dynamics: rotating-frame Hamiltonian, relaxation/dephasing term and the
//! master-equation right-hand side.
//!
//! Everything is expressed in angular units (rad/s). The Hamiltonian is
//! stored as `H/ħ`.

use std::fmt;

use thiserror::Error;

use crate::matrix::{neg_i_commutator, Operator};
use crate::scalar::{mhz_to_angular, re, Real, HBAR};

/// Atomic transition frequencies, relaxation and dephasing rates, and the
/// line-coupling constants of the flux-qubit loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomSpec<T: Real> {
    /// ω₂₁, rad/s.
    pub omega21: T,
    /// ω₃₂, rad/s.
    pub omega32: T,
    /// Γ₂₁, radiative relaxation |2⟩→|1⟩, 1/s.
    pub gamma_rel_21: T,
    /// Γ₃₂, relaxation |3⟩→|2⟩, 1/s.
    pub gamma_rel_32: T,
    /// γ₂₁, decay rate of ρ₂₁, 1/s.
    pub gamma_deph_21: T,
    /// γ₃₁, decay rate of ρ₃₁, 1/s.
    pub gamma_deph_31: T,
    /// γ₃₂, decay rate of ρ₃₂, 1/s.
    pub gamma_deph_32: T,
    pub zeta_21: T,
    pub zeta_32: T,
    /// M, henry.
    pub mutual_inductance: T,
    /// i_PC, ampere.
    pub persistent_current: T,
    /// Z, ohm.
    pub line_impedance: T,
}

impl<T: Real> AtomSpec<T> {
    /// Default Γ₃₂ when only the lower transition has been characterized:
    /// the harmonic-scaling guess 2Γ₂₁, capped at 2γ₃₁ so that the ρ₃₁
    /// coherence can still decay at least at its radiative rate.
    pub fn default_gamma_rel_32(gamma_rel_21: T, gamma_deph_31: T) -> T {
        (gamma_rel_21 + gamma_rel_21).min(gamma_deph_31 + gamma_deph_31)
    }

    /// Default γ₃₂ from additive pure dephasing on both transitions:
    /// γ₃₂ = (Γ₂₁+Γ₃₂)/2 + (γ₂₁−Γ₂₁/2) + (γ₃₁−Γ₃₂/2) = γ₂₁ + γ₃₁.
    pub fn default_gamma_deph_32(gamma_deph_21: T, gamma_deph_31: T) -> T {
        gamma_deph_21 + gamma_deph_31
    }

    /// Parameters of the measured device at the flux degeneracy point:
    /// Γ₂₁ = 6.9·10⁷ s⁻¹, γ₂₁ = 4.5·10⁷ s⁻¹, γ₃₁ = 4.3·10⁷ s⁻¹,
    /// ω₂₁/2π = 10.165 GHz, ω₃₂/2π = 24.465 GHz, i_PC = 200 nA, Z = 50 Ω,
    /// with M derived from the radiative rate. Γ₃₂ and γ₃₂ take their
    /// documented defaults.
    pub fn reference() -> Self {
        let gamma_rel_21 = T::lit(6.9e7);
        let gamma_deph_21 = T::lit(4.5e7);
        let gamma_deph_31 = T::lit(4.3e7);
        let omega21 = mhz_to_angular(T::lit(10_165.0));
        let persistent_current = T::lit(200e-9);
        let line_impedance = T::lit(50.0);
        let gamma_rel_32 = Self::default_gamma_rel_32(gamma_rel_21, gamma_deph_31);
        Self {
            omega21,
            omega32: mhz_to_angular(T::lit(24_465.0)),
            gamma_rel_21,
            gamma_rel_32,
            gamma_deph_21,
            gamma_deph_31,
            gamma_deph_32: Self::default_gamma_deph_32(gamma_deph_21, gamma_deph_31),
            zeta_21: T::one(),
            zeta_32: T::one(),
            mutual_inductance: crate::scattering::rate_to_coupling(
                gamma_rel_21,
                persistent_current,
                omega21,
                line_impedance,
            ),
            persistent_current,
            line_impedance,
        }
    }

    /// Same atom with every rate multiplied by `factor`.
    pub fn with_rates_scaled(&self, factor: T) -> Self {
        Self {
            gamma_rel_21: self.gamma_rel_21 * factor,
            gamma_rel_32: self.gamma_rel_32 * factor,
            gamma_deph_21: self.gamma_deph_21 * factor,
            gamma_deph_31: self.gamma_deph_31 * factor,
            gamma_deph_32: self.gamma_deph_32 * factor,
            ..*self
        }
    }

    /// Largest relaxation or dephasing rate.
    pub fn max_rate(&self) -> T {
        self.rates().into_iter().fold(T::zero(), |m, (_, r)| m.max(r.abs()))
    }

    /// Smallest strictly positive relaxation or dephasing rate.
    pub fn min_positive_rate(&self) -> Option<T> {
        self.rates()
            .into_iter()
            .map(|(_, r)| r)
            .filter(|r| *r > T::zero())
            .fold(None, |m: Option<T>, r| Some(m.map_or(r, |m| m.min(r))))
    }

    fn rates(&self) -> [(&'static str, T); 5] {
        [
            ("gamma_rel_21", self.gamma_rel_21),
            ("gamma_rel_32", self.gamma_rel_32),
            ("gamma_deph_21", self.gamma_deph_21),
            ("gamma_deph_31", self.gamma_deph_31),
            ("gamma_deph_32", self.gamma_deph_32),
        ]
    }

    /// Dipole matrix element φ₂₁ = ζ₂₁·M·i_PC, Wb.
    pub fn dipole_21(&self) -> T {
        self.zeta_21 * self.mutual_inductance * self.persistent_current
    }

    /// Dipole matrix element φ₃₂ = ζ₃₂·M·i_PC, Wb.
    pub fn dipole_32(&self) -> T {
        self.zeta_32 * self.mutual_inductance * self.persistent_current
    }

    /// Probe Rabi amplitude Ω_p = φ₂₁·I_p/ħ for a line current amplitude in A.
    pub fn probe_rabi(&self, current: T) -> T {
        self.dipole_21() * current / T::lit(HBAR)
    }

    /// Control Rabi amplitude Ω_c = φ₃₂·I_c/ħ for a line current amplitude in A.
    pub fn control_rabi(&self, current: T) -> T {
        self.dipole_32() * current / T::lit(HBAR)
    }
}

/// Probe/control Rabi amplitudes and detunings, all rad/s.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DriveSpec<T: Real> {
    /// Ω_p ≥ 0.
    pub omega_p_rabi: T,
    /// Ω_c ≥ 0.
    pub omega_c_rabi: T,
    /// δω_p = ω_p − ω₂₁.
    pub delta_p: T,
    /// δω_c = ω_c − ω₃₂.
    pub delta_c: T,
}

impl<T: Real> DriveSpec<T> {
    pub fn new(omega_p_rabi: T, omega_c_rabi: T, delta_p: T, delta_c: T) -> Self {
        Self { omega_p_rabi, omega_c_rabi, delta_p, delta_c }
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            omega_p_rabi: self.omega_p_rabi * factor,
            omega_c_rabi: self.omega_c_rabi * factor,
            delta_p: self.delta_p * factor,
            delta_c: self.delta_c * factor,
        }
    }

    /// Largest drive or detuning scale, rad/s.
    pub fn max_scale(&self) -> T {
        self.omega_p_rabi
            .abs()
            .max(self.omega_c_rabi.abs())
            .max(self.delta_p.abs())
            .max((self.delta_p + self.delta_c).abs())
            .max(self.delta_c.abs())
    }

    pub fn validate(&self) -> Result<(), DriveError> {
        for (name, v) in [("omega_p_rabi", self.omega_p_rabi), ("omega_c_rabi", self.omega_c_rabi)] {
            if !(v >= T::zero()) {
                return Err(DriveError::NegativeAmplitude(name));
            }
        }
        for (name, v) in [("delta_p", self.delta_p), ("delta_c", self.delta_c)] {
            if !v.is_finite() {
                return Err(DriveError::NonFinite(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DriveError {
    #[error("{0} must be a finite non-negative Rabi amplitude")]
    NegativeAmplitude(&'static str),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
}

/// Kind of bound an [`AtomSpec`] field violates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    NegativeRate,
    NonFinite,
    BelowRadiativeBound,
    DephasingInconsistent,
    MatrixElementRange,
    NonPositive,
}

/// One failed [`AtomSpec`] invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.detail)
    }
}

/// Checks every [`AtomSpec`] invariant and returns the violated ones.
///
/// Besides non-negativity and the matrix-element range, the off-diagonal
/// rates must be at least their radiative values (γ₂₁ ≥ Γ₂₁/2,
/// γ₃₁ ≥ Γ₃₂/2, γ₃₂ ≥ (Γ₂₁+Γ₃₂)/2), and the remaining pure-dephasing
/// excesses φᵢⱼ must satisfy the triangle inequality on √φᵢⱼ. Together
/// these make the generator completely positive, so states stay states.
pub fn validate_atom<T: Real>(atom: &AtomSpec<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field, kind, detail: String| out.push(Violation { field, kind, detail });

    for (field, v) in atom.rates() {
        if !v.is_finite() {
            push(field, ViolationKind::NonFinite, "non-finite rate".into());
        } else if v < T::zero() {
            push(field, ViolationKind::NegativeRate, format!("negative rate ({v:e})"));
        }
    }
    for (field, v) in [("omega21", atom.omega21), ("omega32", atom.omega32)] {
        if !(v > T::zero()) || !v.is_finite() {
            push(field, ViolationKind::NonPositive, format!("transition frequency must be > 0 ({v:e})"));
        }
    }
    for (field, v) in [("zeta_21", atom.zeta_21), ("zeta_32", atom.zeta_32)] {
        if !(v >= T::zero() && v <= T::one()) {
            push(field, ViolationKind::MatrixElementRange, format!("matrix element outside [0, 1] ({v})"));
        }
    }
    for (field, v) in [
        ("mutual_inductance", atom.mutual_inductance),
        ("persistent_current", atom.persistent_current),
        ("line_impedance", atom.line_impedance),
    ] {
        if !(v >= T::zero()) || !v.is_finite() {
            push(field, ViolationKind::NegativeRate, format!("must be finite and non-negative ({v:e})"));
        }
    }

    let half = T::lit(0.5);
    // Relative slack so that exactly-radiative parameter sets pass.
    let slack = |bound: T| bound * T::epsilon() * T::lit(16.0);
    let bounds = [
        ("gamma_deph_21", atom.gamma_deph_21, atom.gamma_rel_21 * half),
        ("gamma_deph_31", atom.gamma_deph_31, atom.gamma_rel_32 * half),
        ("gamma_deph_32", atom.gamma_deph_32, (atom.gamma_rel_21 + atom.gamma_rel_32) * half),
    ];
    let mut excess = [T::zero(); 3];
    for (k, (field, value, bound)) in bounds.into_iter().enumerate() {
        if value + slack(bound) < bound {
            push(
                field,
                ViolationKind::BelowRadiativeBound,
                format!("{field} below radiative bound ({value:e} < {bound:e})"),
            );
        }
        excess[k] = (value - bound).max(T::zero());
    }
    let [d21, d31, d32] = excess.map(|e| e.sqrt());
    let tri_slack = (d21 + d31 + d32) * T::lit(1e-9);
    if d21 > d31 + d32 + tri_slack || d31 > d21 + d32 + tri_slack || d32 > d21 + d31 + tri_slack {
        push(
            "gamma_deph_32",
            ViolationKind::DephasingInconsistent,
            "pure-dephasing excesses violate the triangle inequality on their square roots".into(),
        );
    }
    out
}

/// `H/ħ` in the frame rotating with both drives:
/// `−(δω_p σ₂₂ + (δω_p+δω_c) σ₃₃) − (Ω_p/2)(σ₂₁+σ₁₂) − (Ω_c/2)(σ₃₂+σ₂₃)`.
pub fn build_hamiltonian<T: Real>(drive: &DriveSpec<T>) -> Operator<T> {
    let half = T::lit(0.5);
    let mut h = Operator::zeros();
    h.set(2, 2, re(-drive.delta_p));
    h.set(3, 3, re(-(drive.delta_p + drive.delta_c)));
    let p = re(-drive.omega_p_rabi * half);
    let c = re(-drive.omega_c_rabi * half);
    h.set(2, 1, p);
    h.set(1, 2, p);
    h.set(3, 2, c);
    h.set(2, 3, c);
    h
}

/// Cascade relaxation and coherence decay:
/// `Γ₃₂ρ₃₃(σ₂₂−σ₃₃) + Γ₂₁ρ₂₂(σ₁₁−σ₂₂) − Σ_{i≠j} γᵢⱼ ρᵢⱼ σᵢⱼ`.
pub fn lindblad_apply<T: Real>(atom: &AtomSpec<T>, rho: &Operator<T>) -> Operator<T> {
    let mut out = Operator::zeros();
    let p2 = rho.get(2, 2);
    let p3 = rho.get(3, 3);
    out.set(1, 1, p2 * atom.gamma_rel_21);
    out.set(2, 2, p3 * atom.gamma_rel_32 - p2 * atom.gamma_rel_21);
    out.set(3, 3, -p3 * atom.gamma_rel_32);
    for (i, j, g) in off_diagonal_rates(atom) {
        out.set(i, j, -rho.get(i, j) * g);
    }
    out
}

/// `(i, j, γᵢⱼ)` for the six off-diagonal positions.
pub(crate) fn off_diagonal_rates<T: Real>(atom: &AtomSpec<T>) -> [(usize, usize, T); 6] {
    [
        (2, 1, atom.gamma_deph_21),
        (1, 2, atom.gamma_deph_21),
        (3, 1, atom.gamma_deph_31),
        (1, 3, atom.gamma_deph_31),
        (3, 2, atom.gamma_deph_32),
        (2, 3, atom.gamma_deph_32),
    ]
}

/// `dρ/dt = −i[H/ħ, ρ] + L[ρ]`.
pub fn master_rhs<T: Real>(atom: &AtomSpec<T>, drive: &DriveSpec<T>, rho: &Operator<T>) -> Operator<T> {
    let h = build_hamiltonian(drive);
    master_rhs_with(atom, &h, rho)
}

/// [`master_rhs`] with an explicit Hamiltonian `H/ħ`, for drives whose
/// Rabi frequencies carry a phase.
#[inline]
pub fn master_rhs_with<T: Real>(atom: &AtomSpec<T>, h: &Operator<T>, rho: &Operator<T>) -> Operator<T> {
    neg_i_commutator(h, rho) + lindblad_apply(atom, rho)
}
