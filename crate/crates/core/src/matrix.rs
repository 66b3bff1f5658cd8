//! Dense 3×3 complex operators on the ladder atom's Hilbert space.
//!
//! Levels are addressed by their physical labels `1..=3`, so `get(2, 1)`
//! is ρ₂₁ = ⟨2|ρ|1⟩.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::scalar::{c, i_unit, re, Cplx, Real};

pub const DIM: usize = 3;

/// 3×3 complex matrix: Hamiltonians (as H/ħ, rad/s), dissipator outputs and
/// density matrices all share this representation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Operator<T: Real> {
    m: [[Cplx<T>; DIM]; DIM],
}

impl<T: Real> Default for Operator<T> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<T: Real> Operator<T> {
    pub fn zeros() -> Self {
        Self { m: [[re(T::zero()); DIM]; DIM] }
    }

    pub fn identity() -> Self {
        let mut out = Self::zeros();
        for k in 0..DIM {
            out.m[k][k] = re(T::one());
        }
        out
    }

    pub fn from_rows(m: [[Cplx<T>; DIM]; DIM]) -> Self {
        Self { m }
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> Cplx<T>) -> Self {
        let mut out = Self::zeros();
        for r in 0..DIM {
            for col in 0..DIM {
                out.m[r][col] = f(r, col);
            }
        }
        out
    }

    pub fn diagonal(d: [T; DIM]) -> Self {
        Self::from_fn(|r, col| if r == col { re(d[r]) } else { re(T::zero()) })
    }

    /// Projection/transition operator σᵢⱼ = |i⟩⟨j| (levels `1..=3`).
    pub fn sigma(i: usize, j: usize) -> Self {
        let mut out = Self::zeros();
        out.m[i - 1][j - 1] = re(T::one());
        out
    }

    pub fn rows(&self) -> &[[Cplx<T>; DIM]; DIM] {
        &self.m
    }

    /// Element ⟨i|A|j⟩ with 1-based level labels.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Cplx<T> {
        self.m[i - 1][j - 1]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Cplx<T>) {
        self.m[i - 1][j - 1] = v;
    }

    /// Zero-based element access.
    #[inline]
    pub fn at(&self, r: usize, col: usize) -> Cplx<T> {
        self.m[r][col]
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(|r, col| self.m[col][r].conj())
    }

    pub fn trace(&self) -> Cplx<T> {
        (0..DIM).fold(re(T::zero()), |acc, k| acc + self.m[k][k])
    }

    pub fn scale(&self, s: Cplx<T>) -> Self {
        Self::from_fn(|r, col| self.m[r][col] * s)
    }

    pub fn scale_real(&self, s: T) -> Self {
        Self::from_fn(|r, col| self.m[r][col] * s)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    pub fn max_abs(&self) -> T {
        self.m.iter().flatten().fold(T::zero(), |acc, z| acc.max(z.norm()))
    }

    /// Largest entrywise deviation from Hermiticity, `max |A − A†|`.
    pub fn hermiticity_defect(&self) -> T {
        (*self - self.dagger()).max_abs()
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(|r, col| (self.m[r][col] + self.m[col][r].conj()) * half)
    }

    /// Column-major vectorization: element (r, c) lands at index `r + 3c`.
    pub fn vec_col_major(&self) -> [Cplx<T>; DIM * DIM] {
        let mut v = [re(T::zero()); DIM * DIM];
        for col in 0..DIM {
            for r in 0..DIM {
                v[r + DIM * col] = self.m[r][col];
            }
        }
        v
    }

    pub fn from_vec_col_major(v: &[Cplx<T>; DIM * DIM]) -> Self {
        Self::from_fn(|r, col| v[r + DIM * col])
    }

    /// Eigenvalues of the Hermitian part of `self`, ascending, via cyclic
    /// complex Jacobi rotations (accurate to a few ulps of ‖A‖ even for
    /// clustered spectra, unlike the closed-form cubic).
    pub fn hermitian_eigenvalues(&self) -> [T; DIM] {
        let mut a = self.hermitian_part();
        let scale = a.max_abs();
        if scale == T::zero() {
            return [T::zero(); DIM];
        }
        let thresh = T::epsilon() * scale * T::lit(1e-2);
        for _sweep in 0..32 {
            let off = a.m[0][1].norm() + a.m[0][2].norm() + a.m[1][2].norm();
            if off <= thresh {
                break;
            }
            for (p, q) in [(0, 1), (0, 2), (1, 2)] {
                let apq = a.m[p][q];
                let mag = apq.norm();
                if mag <= thresh * T::lit(1e-3) {
                    continue;
                }
                let phase = apq / mag;
                let app = a.m[p][p].re;
                let aqq = a.m[q][q].re;
                let theta = (aqq - app) / (mag + mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let cs = T::one() / (t * t + T::one()).sqrt();
                let sn = t * cs;
                // G = Φ·P with Φ = diag(1, e^{-iφ}) on (p, q) and P the real
                // Jacobi rotation; A ← G† A G.
                let mut g = Self::identity();
                g.m[p][p] = re(cs);
                g.m[p][q] = re(sn);
                g.m[q][p] = -phase.conj() * sn;
                g.m[q][q] = phase.conj() * cs;
                a = g.dagger() * a * g;
                a.m[p][q] = re(T::zero());
                a.m[q][p] = re(T::zero());
            }
        }
        let mut ev = [a.m[0][0].re, a.m[1][1].re, a.m[2][2].re];
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }
}

impl<T: Real> Add for Operator<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::from_fn(|r, col| self.m[r][col] + rhs.m[r][col])
    }
}

impl<T: Real> AddAssign for Operator<T> {
    fn add_assign(&mut self, rhs: Self) {
        for r in 0..DIM {
            for col in 0..DIM {
                self.m[r][col] = self.m[r][col] + rhs.m[r][col];
            }
        }
    }
}

impl<T: Real> Sub for Operator<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::from_fn(|r, col| self.m[r][col] - rhs.m[r][col])
    }
}

impl<T: Real> Neg for Operator<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::from_fn(|r, col| -self.m[r][col])
    }
}

impl<T: Real> Mul for Operator<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::from_fn(|r, col| {
            self.m[r][0] * rhs.m[0][col] + self.m[r][1] * rhs.m[1][col] + self.m[r][2] * rhs.m[2][col]
        })
    }
}

/// `−i·[A, B]`, the coherent part of the master equation for `A = H/ħ`.
pub fn neg_i_commutator<T: Real>(h: &Operator<T>, rho: &Operator<T>) -> Operator<T> {
    h.commutator(rho).scale(-i_unit::<T>())
}

/// Deterministic Hermitian positive semidefinite unit-trace matrix built from
/// nine complex seeds, `ρ = A A† / tr(A A†)`; used by tests and tools that need
/// arbitrary valid states.
pub fn state_from_seeds<T: Real>(seeds: &[(T, T); DIM * DIM]) -> Operator<T> {
    let a = Operator::from_fn(|r, col| {
        let (x, y) = seeds[r * DIM + col];
        c(x, y)
    });
    let p = a * a.dagger();
    let tr = p.trace().re;
    p.scale_real(T::one() / tr).hermitian_part()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(re_: f64, im: f64) -> Cplx<f64> {
        c(re_, im)
    }

    #[test]
    fn sigma_products_compose() {
        let s21 = Operator::<f64>::sigma(2, 1);
        let s12 = Operator::<f64>::sigma(1, 2);
        assert_eq!(s21 * s12, Operator::sigma(2, 2));
        assert_eq!(s12 * s21, Operator::sigma(1, 1));
        assert_eq!((s21 * s21).max_abs(), 0.0);
    }

    #[test]
    fn vectorization_is_column_major() {
        let a = Operator::<f64>::sigma(2, 1);
        let v = a.vec_col_major();
        assert_eq!(v[1], z(1.0, 0.0));
        let b = Operator::<f64>::sigma(1, 3);
        assert_eq!(b.vec_col_major()[6], z(1.0, 0.0));
        assert_eq!(Operator::from_vec_col_major(&v), a);
    }

    #[test]
    fn eigenvalues_of_degenerate_projector_are_exact() {
        let ev = Operator::<f64>::sigma(1, 1).hermitian_eigenvalues();
        assert_eq!(ev[0].abs(), 0.0);
        assert_eq!(ev[1].abs(), 0.0);
        assert!((ev[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_of_complex_hermitian_matrix() {
        // Spectrum {−1, 2, 5} rotated by a complex unitary.
        let d = Operator::<f64>::diagonal([-1.0, 2.0, 5.0]);
        let s = 1.0 / 2f64.sqrt();
        let u = Operator::from_rows([
            [z(s, 0.0), z(0.0, s), z(0.0, 0.0)],
            [z(0.0, s), z(s, 0.0), z(0.0, 0.0)],
            [z(0.0, 0.0), z(0.0, 0.0), z(0.0, 1.0)],
        ]);
        let a = u * d * u.dagger();
        let ev = a.hermitian_eigenvalues();
        for (got, want) in ev.iter().zip([-1.0, 2.0, 5.0]) {
            assert!((got - want).abs() < 1e-13, "{got} vs {want}");
        }
    }

    #[test]
    fn seeded_states_are_valid() {
        let seeds = [
            (0.3, -0.1),
            (1.2, 0.4),
            (0.0, 0.7),
            (-0.5, 0.2),
            (0.9, 0.0),
            (0.1, 0.1),
            (0.4, -0.8),
            (0.6, 0.3),
            (-0.2, 0.5),
        ];
        let rho = state_from_seeds(&seeds);
        assert!((rho.trace() - z(1.0, 0.0)).norm() < 1e-15);
        assert!(rho.is_hermitian(0.0));
        assert!(rho.hermitian_eigenvalues()[0] > -1e-15);
    }
}
