//! Damped Gauss-Newton (Levenberg-Marquardt) least squares for a handful
//! of parameters.

use crate::linalg::{invert_real, solve_real};
use crate::scalar::Real;

/// Residual vector and Jacobian of a least-squares problem.
pub(crate) trait Problem<T: Real> {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    /// Writes residuals into `out` (length `n_residuals`).
    fn residuals(&self, p: &[T], out: &mut [T]);
    /// Writes the row-major `n_residuals × n_params` Jacobian into `jac`.
    fn jacobian(&self, p: &[T], jac: &mut [T]);
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Settings<T: Real> {
    pub max_iterations: usize,
    /// Gradient tolerance relative to ‖J‖·‖r‖.
    pub gtol: T,
    /// Gradient floor relative to ‖J‖·‖data‖, for fits that reach the
    /// rounding level.
    pub gfloor: T,
    /// Relative parameter-step tolerance.
    pub xtol: T,
    /// Relative cost-reduction tolerance. Catches fits that creep along a
    /// flat valley towards infinity, where the gradient test never fires.
    pub ftol: T,
}

impl<T: Real> Default for Settings<T> {
    fn default() -> Self {
        Self { max_iterations: 200, gtol: T::tol(1e-8), gfloor: T::tol(1e-13), xtol: T::tol(1e-14), ftol: T::tol(1e-8) }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Outcome<T: Real> {
    pub params: Vec<T>,
    pub residual_norm: T,
    pub gradient_norm: T,
    pub iterations: usize,
    pub converged: bool,
    /// Diagonal of `(JᵀJ)⁻¹·s²`, `s²` the residual variance; `None` when
    /// the normal matrix is singular.
    pub variances: Option<Vec<T>>,
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

struct Linearization<T: Real> {
    normal: Vec<T>,
    gradient: Vec<T>,
    jac_norm: T,
}

fn linearize<T: Real, P: Problem<T>>(problem: &P, p: &[T], r: &[T], jac: &mut [T]) -> Linearization<T> {
    let n = problem.n_params();
    let m = problem.n_residuals();
    problem.jacobian(p, jac);
    let mut normal = vec![T::zero(); n * n];
    let mut gradient = vec![T::zero(); n];
    for row in 0..m {
        let jr = &jac[row * n..(row + 1) * n];
        for a in 0..n {
            gradient[a] = gradient[a] + jr[a] * r[row];
            for b in 0..n {
                normal[a * n + b] = normal[a * n + b] + jr[a] * jr[b];
            }
        }
    }
    let jac_norm = (0..n).map(|a| normal[a * n + a]).sum::<T>().sqrt();
    Linearization { normal, gradient, jac_norm }
}

/// Minimizes ‖r(p)‖² from `p0`. `data_norm` is the norm of the (weighted)
/// observations, used to scale the gradient floor.
pub(crate) fn minimize<T: Real, P: Problem<T>>(problem: &P, p0: Vec<T>, data_norm: T, s: &Settings<T>) -> Outcome<T> {
    let n = problem.n_params();
    let m = problem.n_residuals();
    let mut p = p0;
    let mut r = vec![T::zero(); m];
    let mut r_trial = vec![T::zero(); m];
    let mut jac = vec![T::zero(); m * n];
    problem.residuals(&p, &mut r);
    let mut cost = norm(&r);
    let mut lambda = T::lit(1e-3);
    let three = T::lit(3.0);
    let lambda_max = T::lit(1e16);
    let mut iterations = 0;
    let mut lin = linearize(problem, &p, &r, &mut jac);
    let mut converged_by_cost = false;

    let gradient_ok = |lin: &Linearization<T>, cost: T| {
        let g = lin.gradient.iter().fold(T::zero(), |a, x| a.max(x.abs()));
        (g, g <= s.gtol * lin.jac_norm * cost + s.gfloor * lin.jac_norm * data_norm)
    };

    while iterations < s.max_iterations {
        if gradient_ok(&lin, cost).1 {
            break;
        }
        iterations += 1;
        let mut accepted = false;
        let mut small_step = false;
        let mut stalled = false;
        while lambda <= lambda_max {
            let mut damped = lin.normal.clone();
            for a in 0..n {
                let d = lin.normal[a * n + a].max(T::min_positive_value());
                damped[a * n + a] = damped[a * n + a] + lambda * d;
            }
            let rhs: Vec<T> = lin.gradient.iter().map(|g| -*g).collect();
            let Ok(step) = solve_real(&damped, &rhs, T::zero()) else {
                lambda = lambda * three;
                continue;
            };
            let trial: Vec<T> = p.iter().zip(&step).map(|(a, b)| *a + *b).collect();
            problem.residuals(&trial, &mut r_trial);
            let trial_cost = norm(&r_trial);
            if trial_cost.is_finite() && trial_cost < cost {
                small_step = norm(&step) <= s.xtol * (norm(&p) + s.xtol);
                stalled = cost - trial_cost <= s.ftol * cost;
                p = trial;
                std::mem::swap(&mut r, &mut r_trial);
                cost = trial_cost;
                lambda = (lambda / three).max(T::lit(1e-12));
                accepted = true;
                break;
            }
            lambda = lambda * three;
        }
        if !accepted {
            break;
        }
        lin = linearize(problem, &p, &r, &mut jac);
        if stalled {
            converged_by_cost = true;
        }
        if small_step || stalled {
            break;
        }
    }

    let (gradient_norm, gradient_converged) = gradient_ok(&lin, cost);
    let converged = gradient_converged || converged_by_cost;
    let dof = m.saturating_sub(n).max(1);
    let variance = cost * cost / T::from_usize(dof).unwrap_or(T::one());
    let variances =
        invert_real(&lin.normal, n, T::zero()).ok().map(|inv| (0..n).map(|a| inv[a * n + a] * variance).collect());
    Outcome { params: p, residual_norm: cost, gradient_norm, iterations, converged, variances }
}
