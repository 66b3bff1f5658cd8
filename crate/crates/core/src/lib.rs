//! Single three-level ladder atom coupled to an open 1D transmission line.
//!
//! The crate computes the stationary state of the atom's master equation,
//! converts its probe coherence into the transmission of the line, sweeps
//! drives to produce EIT spectra, Autler-Townes maps and extinction curves,
//! and fits measured line shapes back to physical rates.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the `*F64`
//! aliases below are what most callers want.

// `!(x > 0)` is used on purpose throughout: NaN must fail these checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atom;
pub mod experiments;
pub mod fit;
pub mod linalg;
mod lm;
pub mod matrix;
pub mod scalar;
pub mod scattering;
pub mod solver;
pub mod state;

pub use atom::{
    build_hamiltonian, lindblad_apply, master_rhs, master_rhs_with, validate_atom, AtomSpec, DriveSpec, Violation,
};
pub use matrix::Operator;
pub use scalar::{Cplx, Real};
pub use scattering::{
    coupling_to_rate, power_transmission_ideal, rate_to_coupling, transmission_numeric, transmission_weak_probe,
    ScatteringError, ScatteringPoint,
};
pub use solver::{build_liouvillian, evolve, steady_state, EvolveConfig, Liouvillian, SolverError};
pub use state::{DensityMatrix, StateError};

pub type AtomSpecF64 = AtomSpec<f64>;
pub type AtomSpecF32 = AtomSpec<f32>;
pub type DriveSpecF64 = DriveSpec<f64>;
pub type DriveSpecF32 = DriveSpec<f32>;
pub type DensityMatrixF64 = DensityMatrix<f64>;
pub type DensityMatrixF32 = DensityMatrix<f32>;
pub type OperatorF64 = Operator<f64>;
pub type ScatteringPointF64 = ScatteringPoint<f64>;
pub type LiouvillianF64 = Liouvillian<f64>;
