//! Small dense linear solves (Gaussian elimination with partial pivoting).

use crate::scalar::{re, Cplx, Real};

/// Pivot fell below `threshold` during elimination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singular {
    pub column: usize,
}

/// Solves `a·x = b` in place for a square complex system. A pivot whose
/// magnitude is at most `threshold` is reported as [`Singular`].
pub fn solve_complex<T: Real, const N: usize>(
    mut a: [[Cplx<T>; N]; N],
    mut b: [Cplx<T>; N],
    threshold: T,
) -> Result<[Cplx<T>; N], Singular> {
    for col in 0..N {
        let pivot_row = (col..N)
            .max_by(|&r1, &r2| a[r1][col].norm().partial_cmp(&a[r2][col].norm()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(col);
        if !(a[pivot_row][col].norm() > threshold) {
            return Err(Singular { column: col });
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        let inv = re::<T>(T::one()) / a[col][col];
        for r in col + 1..N {
            let f = a[r][col] * inv;
            if f == re(T::zero()) {
                continue;
            }
            let pivot = a[col];
            for (dst, v) in a[r][col..].iter_mut().zip(&pivot[col..]) {
                *dst = *dst - f * *v;
            }
            let v = b[col];
            b[r] = b[r] - f * v;
        }
    }
    let mut x = [re(T::zero()); N];
    for r in (0..N).rev() {
        let mut acc = b[r];
        for k in r + 1..N {
            acc = acc - a[r][k] * x[k];
        }
        x[r] = acc / a[r][r];
    }
    Ok(x)
}

/// Solves a small real system `a·x = b` (row-major `n×n`).
pub fn solve_real<T: Real>(a: &[T], b: &[T], threshold: T) -> Result<Vec<T>, Singular> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| {
                m[r1 * n + col].abs().partial_cmp(&m[r2 * n + col].abs()).unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if !(m[pivot_row * n + col].abs() > threshold) {
            return Err(Singular { column: col });
        }
        if pivot_row != col {
            for k in 0..n {
                m.swap(col * n + k, pivot_row * n + k);
            }
            rhs.swap(col, pivot_row);
        }
        for r in col + 1..n {
            let f = m[r * n + col] / m[col * n + col];
            for k in col..n {
                m[r * n + k] = m[r * n + k] - f * m[col * n + k];
            }
            rhs[r] = rhs[r] - f * rhs[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for k in r + 1..n {
            acc = acc - m[r * n + k] * x[k];
        }
        x[r] = acc / m[r * n + r];
    }
    Ok(x)
}

/// Inverse of a small real matrix, column by column.
pub fn invert_real<T: Real>(a: &[T], n: usize, threshold: T) -> Result<Vec<T>, Singular> {
    let mut inv = vec![T::zero(); n * n];
    for col in 0..n {
        let mut e = vec![T::zero(); n];
        e[col] = T::one();
        let x = solve_real(a, &e, threshold)?;
        for r in 0..n {
            inv[r * n + col] = x[r];
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c;

    #[test]
    fn complex_system_with_required_pivoting() {
        let a = [[c(0.0, 0.0), c(1.0, 1.0)], [c(2.0, 0.0), c(0.0, -1.0)]];
        let x_true = [c(0.5, -0.25), c(-1.0, 3.0)];
        let b = [a[0][0] * x_true[0] + a[0][1] * x_true[1], a[1][0] * x_true[0] + a[1][1] * x_true[1]];
        let x = solve_complex(a, b, 1e-300).unwrap();
        for (g, w) in x.iter().zip(x_true) {
            assert!((g - w).norm() < 1e-15);
        }
    }

    #[test]
    fn singular_complex_system_is_reported() {
        let a = [[c(1.0, 0.0), c(2.0, 0.0)], [c(2.0, 0.0), c(4.0, 0.0)]];
        assert!(solve_complex(a, [c(1.0, 0.0); 2], 1e-12).is_err());
    }

    #[test]
    fn real_inverse() {
        let a = [4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let inv = invert_real(&a, 3, 1e-300).unwrap();
        for r in 0..3 {
            for col in 0..3 {
                let v: f64 = (0..3).map(|k| a[r * 3 + k] * inv[k * 3 + col]).sum();
                assert!((v - if r == col { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }
}
