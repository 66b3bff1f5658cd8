//! Extraction of relaxation, dephasing and drive parameters from measured
//! transmission traces by nonlinear least squares on the weak-probe
//! line shape.
//!
//! Internally all frequencies are divided by a characteristic width of the
//! trace, so the optimizer always works with O(1) numbers.

use thiserror::Error;

use crate::lm::{minimize, Problem, Settings};
use crate::scalar::{c, re, Cplx, Real};

/// Minimum number of samples in a trace.
pub const MIN_TRACE_LEN: usize = 8;

/// Label attached to reported uncertainties.
pub const UNCERTAINTY_METHOD: &str = "local quadratic estimate";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("bad trace: {0}")]
    BadTrace(String),
}

/// Measured or synthetic transmission samples.
#[derive(Clone, Debug, PartialEq)]
pub enum Samples<T: Real> {
    /// Complex `t`, phase available.
    Complex(Vec<Cplx<T>>),
    /// `|t|` only.
    Magnitude(Vec<T>),
}

impl<T: Real> Samples<T> {
    fn len(&self) -> usize {
        match self {
            Samples::Complex(v) => v.len(),
            Samples::Magnitude(v) => v.len(),
        }
    }
}

/// Transmission versus probe detuning (rad/s).
#[derive(Clone, Debug, PartialEq)]
pub struct Trace<T: Real> {
    detunings: Vec<T>,
    samples: Samples<T>,
    weights: Option<Vec<T>>,
}

impl<T: Real> Trace<T> {
    pub fn new(detunings: Vec<T>, samples: Samples<T>, weights: Option<Vec<T>>) -> Result<Self, FitError> {
        let n = detunings.len();
        if samples.len() != n {
            return Err(FitError::BadTrace(format!("{} detunings but {} samples", n, samples.len())));
        }
        if n < MIN_TRACE_LEN {
            return Err(FitError::BadTrace(format!("{n} samples, need at least {MIN_TRACE_LEN}")));
        }
        if detunings.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FitError::BadTrace("detunings not strictly increasing".into()));
        }
        let finite = match &samples {
            Samples::Complex(v) => v.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
            Samples::Magnitude(v) => v.iter().all(|x| x.is_finite()),
        };
        if !finite || detunings.iter().any(|d| !d.is_finite()) {
            return Err(FitError::BadTrace("non-finite value".into()));
        }
        if let Some(w) = &weights {
            if w.len() != n {
                return Err(FitError::BadTrace(format!("{} weights for {n} samples", w.len())));
            }
            if w.iter().any(|x| !(*x > T::zero()) || !x.is_finite()) {
                return Err(FitError::BadTrace("weights must be positive and finite".into()));
            }
        }
        Ok(Self { detunings, samples, weights })
    }

    pub fn complex(detunings: Vec<T>, t: Vec<Cplx<T>>) -> Result<Self, FitError> {
        Self::new(detunings, Samples::Complex(t), None)
    }

    pub fn magnitude(detunings: Vec<T>, abs_t: Vec<T>) -> Result<Self, FitError> {
        Self::new(detunings, Samples::Magnitude(abs_t), None)
    }

    pub fn with_weights(self, weights: Vec<T>) -> Result<Self, FitError> {
        Self::new(self.detunings, self.samples, Some(weights))
    }

    pub fn detunings(&self) -> &[T] {
        &self.detunings
    }

    pub fn samples(&self) -> &Samples<T> {
        &self.samples
    }

    pub fn domain(&self) -> Domain {
        match self.samples {
            Samples::Complex(_) => Domain::Complex,
            Samples::Magnitude(_) => Domain::Magnitude,
        }
    }

    fn weight(&self, k: usize) -> T {
        self.weights.as_ref().map_or(T::one(), |w| w[k])
    }

    /// `|1 − t|` (complex traces) or `1 − |t|²` (magnitude traces): both are
    /// non-negative peaks centred on the resonance.
    fn response(&self) -> Vec<T> {
        match &self.samples {
            Samples::Complex(v) => v.iter().map(|t| (re(T::one()) - *t).norm()).collect(),
            Samples::Magnitude(v) => v.iter().map(|a| T::one() - *a * *a).collect(),
        }
    }
}

/// Residual domain used by a fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    /// Real and imaginary parts stacked.
    Complex,
    /// `|t|` residuals.
    Magnitude,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Complex => "complex",
            Domain::Magnitude => "magnitude",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitWarning {
    /// No dip in the trace; the coupling went to zero.
    NoDip,
    /// Control amplitude below γ₃₁/2: the transparency window is too
    /// shallow to separate γ₃₁ from Ω_c.
    Identifiability,
}

/// One fitted quantity, rad/s or 1/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate<T: Real> {
    pub name: &'static str,
    pub value: T,
    /// One-sigma, from the local quadratic model; NaN if unavailable.
    pub uncertainty: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport<T: Real> {
    pub estimates: Vec<Estimate<T>>,
    pub residual_norm: T,
    pub gradient_norm: T,
    pub iterations: usize,
    pub converged: bool,
    pub domain: Domain,
    pub warnings: Vec<FitWarning>,
}

impl<T: Real> FitReport<T> {
    pub fn get(&self, name: &str) -> Option<T> {
        self.estimates.iter().find(|e| e.name == name).map(|e| e.value)
    }
}

/// Rates already known when fitting a control-on trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnownRates<T: Real> {
    pub gamma_rel_21: T,
    pub gamma_deph_21: T,
    /// Control detuning during acquisition, rad/s.
    pub delta_c: T,
}

/// Complex line shape at normalized detuning `u` and its derivatives with
/// respect to the model parameters.
trait LineShape<T: Real> {
    const NAMES: &'static [&'static str];
    fn eval(&self, p: &[T], x: T, grad: Option<&mut [Cplx<T>]>) -> Cplx<T>;
}

/// `t = 1 − G / (2(g − i(x − x₀)))`, parameters `[G, g, x₀]`.
struct TwoLevel;

impl<T: Real> LineShape<T> for TwoLevel {
    const NAMES: &'static [&'static str] = &["gamma_rel_21", "gamma_deph_21", "center_offset"];

    fn eval(&self, p: &[T], x: T, grad: Option<&mut [Cplx<T>]>) -> Cplx<T> {
        let two = T::lit(2.0);
        let (g_rel, g_deph, x0) = (p[0], p[1], p[2]);
        let d = c(two * g_deph, -two * (x - x0));
        let inv = re::<T>(T::one()) / d;
        if let Some(g) = grad {
            let k = inv * inv * g_rel;
            g[0] = -inv;
            g[1] = k * two;
            g[2] = k * c(T::zero(), two);
        }
        re::<T>(T::one()) - inv * g_rel
    }
}

/// Full weak-probe line shape with fixed `G, g₂₁, x_c`; parameters
/// `[g₃₁, Ω, x₀]`.
struct Eit<T: Real> {
    g_rel: T,
    g21: T,
    xc: T,
}

impl<T: Real> LineShape<T> for Eit<T> {
    const NAMES: &'static [&'static str] = &["gamma_deph_31", "omega_c_rabi", "center_offset"];

    fn eval(&self, p: &[T], x: T, grad: Option<&mut [Cplx<T>]>) -> Cplx<T> {
        let two = T::lit(2.0);
        let (g31, om, x0) = (p[0], p[1], p[2]);
        let u = x - x0;
        let e = c(two * g31, -two * (u + self.xc));
        let e_inv = re::<T>(T::one()) / e;
        let om2 = om * om;
        let d = c(two * self.g21, -two * u) + e_inv * om2;
        let d_inv = re::<T>(T::one()) / d;
        if let Some(g) = grad {
            let k = d_inv * d_inv * self.g_rel;
            let e_inv2 = e_inv * e_inv;
            g[0] = k * (-(e_inv2 * om2) * two);
            g[1] = k * (e_inv * (two * om));
            let i2 = c(T::zero(), two);
            g[2] = k * (i2 - i2 * e_inv2 * om2);
        }
        re::<T>(T::one()) - d_inv * self.g_rel
    }
}

/// Least-squares problem over a normalized trace.
struct TraceProblem<'a, T: Real, L: LineShape<T>> {
    shape: &'a L,
    x: Vec<T>,
    trace: &'a Trace<T>,
}

impl<T: Real, L: LineShape<T>> Problem<T> for TraceProblem<'_, T, L> {
    fn n_params(&self) -> usize {
        L::NAMES.len()
    }

    fn n_residuals(&self) -> usize {
        match self.trace.samples {
            Samples::Complex(_) => 2 * self.x.len(),
            Samples::Magnitude(_) => self.x.len(),
        }
    }

    fn residuals(&self, p: &[T], out: &mut [T]) {
        for (k, &x) in self.x.iter().enumerate() {
            let w = self.trace.weight(k);
            let t = self.shape.eval(p, x, None);
            match &self.trace.samples {
                Samples::Complex(v) => {
                    out[2 * k] = w * (t.re - v[k].re);
                    out[2 * k + 1] = w * (t.im - v[k].im);
                }
                Samples::Magnitude(v) => out[k] = w * (t.norm() - v[k]),
            }
        }
    }

    fn jacobian(&self, p: &[T], jac: &mut [T]) {
        let n = L::NAMES.len();
        let mut g = [re(T::zero()); 4];
        for (k, &x) in self.x.iter().enumerate() {
            let w = self.trace.weight(k);
            let t = self.shape.eval(p, x, Some(&mut g[..n]));
            match self.trace.samples {
                Samples::Complex(_) => {
                    for a in 0..n {
                        jac[(2 * k) * n + a] = w * g[a].re;
                        jac[(2 * k + 1) * n + a] = w * g[a].im;
                    }
                }
                Samples::Magnitude(_) => {
                    let mag = t.norm().max(T::min_positive_value());
                    for a in 0..n {
                        jac[k * n + a] = w * (t.conj() * g[a]).re / mag;
                    }
                }
            }
        }
    }
}

fn weighted_data_norm<T: Real>(trace: &Trace<T>) -> T {
    let n = trace.detunings.len();
    (0..n)
        .map(|k| {
            let w = trace.weight(k);
            let v = match &trace.samples {
                Samples::Complex(v) => v[k].norm_sqr(),
                Samples::Magnitude(v) => v[k] * v[k],
            };
            w * w * v
        })
        .sum::<T>()
        .sqrt()
}

fn argmax<T: Real>(v: &[T]) -> usize {
    v.iter().enumerate().fold((0, T::neg_infinity()), |(bi, bv), (i, x)| if *x > bv { (i, *x) } else { (bi, bv) }).0
}

/// Half width of the peak at `peak` where `y` falls to `level`, interpolated
/// linearly on both sides and averaged over the sides that cross.
fn half_width<T: Real>(x: &[T], y: &[T], peak: usize, level: T) -> Option<T> {
    let crossing = |range: &mut dyn Iterator<Item = usize>, step_back: bool| -> Option<T> {
        for k in range {
            let prev = if step_back { k + 1 } else { k - 1 };
            if y[k] <= level {
                let f = (y[prev] - level) / (y[prev] - y[k]);
                let xc = x[prev] + (x[k] - x[prev]) * f;
                return Some((xc - x[peak]).abs());
            }
        }
        None
    };
    let left = crossing(&mut (0..peak).rev(), true);
    let right = crossing(&mut (peak + 1..x.len()), false);
    match (left, right) {
        (Some(a), Some(b)) => Some((a + b) * T::lit(0.5)),
        (a, b) => a.or(b),
    }
}

fn to_report<T: Real>(
    names: &[&'static str],
    out: crate::lm::Outcome<T>,
    unit: T,
    offset: T,
    domain: Domain,
    warnings: Vec<FitWarning>,
) -> FitReport<T> {
    let estimates = names
        .iter()
        .enumerate()
        .map(|(a, &name)| {
            let shift = if name == "center_offset" { offset } else { T::zero() };
            let mut value = out.params[a] * unit + shift;
            if name == "omega_c_rabi" {
                // Only Ω² enters the model.
                value = value.abs();
            }
            let uncertainty = out.variances.as_ref().map_or(T::nan(), |v| v[a].max(T::zero()).sqrt() * unit);
            Estimate { name, value, uncertainty }
        })
        .collect();
    FitReport {
        estimates,
        residual_norm: out.residual_norm,
        gradient_norm: out.gradient_norm,
        iterations: out.iterations,
        converged: out.converged,
        domain,
        warnings,
    }
}

/// Fits the control-off line shape `t = 1 − Γ₂₁/(2(γ₂₁ − i(δω_p − δ₀)))`
/// for `Γ₂₁`, `γ₂₁` and the center offset `δ₀`.
///
/// Starting point from the peak of the response: `δ₀` at its maximum,
/// `γ₂₁` from its half width, `Γ₂₁ = 2γ₂₁·depth`. For magnitude-only traces
/// the physical branch `Γ₂₁ ≤ 2γ₂₁` is selected, since `|t|` cannot tell
/// `Γ₂₁` from `4γ₂₁ − Γ₂₁`.
pub fn fit_two_level<T: Real>(trace: &Trace<T>) -> Result<FitReport<T>, FitError> {
    let x = &trace.detunings;
    let n = x.len();
    let span = x[n - 1] - x[0];
    let resp = trace.response();
    let peak = argmax(&resp);
    let height = resp[peak];
    let center = x[peak];
    let mut warnings = Vec::new();

    let (level, depth_of) = match trace.domain() {
        // |1 − t|² is Lorentzian with half width γ: cross at 1/√2 of the peak.
        Domain::Complex => (height * T::lit(std::f64::consts::FRAC_1_SQRT_2), height),
        // 1 − |t|² is Lorentzian with half width γ.
        Domain::Magnitude => (height * T::lit(0.5), T::one() - (T::one() - height).max(T::zero()).sqrt()),
    };
    let fallback_width = span / T::lit(8.0);
    let (width, depth) = if height > T::tol(1e-9) {
        (half_width(x, &resp, peak, level).unwrap_or(fallback_width), depth_of)
    } else {
        warnings.push(FitWarning::NoDip);
        (fallback_width, T::zero())
    };
    let unit = if width > T::zero() { width } else { span.max(T::one()) };

    let problem = TraceProblem { shape: &TwoLevel, x: x.iter().map(|v| (*v - center) / unit).collect(), trace };
    let p0 = vec![T::lit(2.0) * depth, T::one(), T::zero()];
    let out = minimize(&problem, p0, weighted_data_norm(trace), &Settings::default());
    let mut report = to_report(<TwoLevel as LineShape<T>>::NAMES, out, unit, center, trace.domain(), warnings);
    if report.get("gamma_rel_21").is_some_and(|g| g.abs() <= T::tol(1e-9) * unit)
        && !report.warnings.contains(&FitWarning::NoDip)
    {
        report.warnings.push(FitWarning::NoDip);
    }
    Ok(report)
}

/// Fits `γ₃₁`, `Ω_c` and `δ₀` in the full weak-probe line shape with
/// `Γ₂₁`, `γ₂₁` (and the control detuning) held at `known`.
///
/// The start point is the best node of a logarithmic `(γ₃₁, Ω_c)` grid
/// around the trace's own scales, centered between the response peaks.
pub fn fit_eit<T: Real>(trace: &Trace<T>, known: &KnownRates<T>) -> Result<FitReport<T>, FitError> {
    if !(known.gamma_rel_21 > T::zero()) || !(known.gamma_deph_21 > T::zero()) {
        return Err(FitError::BadTrace("known Γ₂₁ and γ₂₁ must be positive".into()));
    }
    let x = &trace.detunings;
    let n = x.len();
    let resp = trace.response();
    let center = symmetric_center(x, &resp);
    let unit = known.gamma_deph_21;
    let xs: Vec<T> = x.iter().map(|v| (*v - center) / unit).collect();
    let span = (xs[n - 1] - xs[0]).abs();
    let shape = Eit { g_rel: known.gamma_rel_21 / unit, g21: T::one(), xc: known.delta_c / unit };
    let problem = TraceProblem { shape: &shape, x: xs, trace };

    let mut best = (T::infinity(), vec![T::one(), T::one(), T::zero()]);
    let mut buf = vec![T::zero(); problem.n_residuals()];
    let g_nodes = log_nodes(T::lit(1e-2), T::lit(1e2), 41);
    let o_nodes = log_nodes(T::lit(1e-2), span.max(T::lit(1.0)), 81);
    for &g31 in &g_nodes {
        for &om in &o_nodes {
            let p = [g31, om, T::zero()];
            problem.residuals(&p, &mut buf);
            let cost = buf.iter().map(|r| *r * *r).sum::<T>();
            if cost < best.0 {
                best = (cost, p.to_vec());
            }
        }
    }
    let out = minimize(&problem, best.1, weighted_data_norm(trace), &Settings::default());
    let mut report = to_report(<Eit<T> as LineShape<T>>::NAMES, out, unit, center, trace.domain(), Vec::new());
    if let (Some(g31), Some(om)) = (report.get("gamma_deph_31"), report.get("omega_c_rabi")) {
        if om < g31.abs() * T::lit(0.5) {
            report.warnings.push(FitWarning::Identifiability);
        }
    }
    Ok(report)
}

fn log_nodes<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| {
            let f = T::from_usize(k).unwrap_or(T::zero()) / T::from_usize(n - 1).unwrap_or(T::one());
            (a + (b - a) * f).exp()
        })
        .collect()
}

/// Midpoint of the two largest local maxima of `y`, or the global maximum
/// when there is only one.
fn symmetric_center<T: Real>(x: &[T], y: &[T]) -> T {
    let n = x.len();
    let mut peaks: Vec<usize> = (1..n - 1).filter(|&k| y[k] > y[k - 1] && y[k] >= y[k + 1]).collect();
    peaks.sort_by(|&a, &b| y[b].partial_cmp(&y[a]).unwrap_or(std::cmp::Ordering::Equal));
    match peaks.as_slice() {
        [a, b, ..] if y[*b] > y[*a] * T::lit(0.5) => (x[*a] + x[*b]) * T::lit(0.5),
        _ => x[argmax(y)],
    }
}

/// Weak-probe transmission samples of the control-off line shape; handy
/// for synthetic traces.
pub fn two_level_curve<T: Real>(gamma_rel_21: T, gamma_deph_21: T, center: T, detunings: &[T]) -> Vec<Cplx<T>> {
    detunings.iter().map(|&d| TwoLevel.eval(&[gamma_rel_21, gamma_deph_21, center], d, None)).collect()
}

/// Weak-probe transmission samples of the control-on line shape.
pub fn eit_curve<T: Real>(
    known: &KnownRates<T>,
    gamma_deph_31: T,
    omega_c: T,
    center: T,
    detunings: &[T],
) -> Vec<Cplx<T>> {
    let shape = Eit { g_rel: known.gamma_rel_21, g21: known.gamma_deph_21, xc: known.delta_c };
    detunings.iter().map(|&d| shape.eval(&[gamma_deph_31, omega_c, center], d, None)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::linspace;
    use crate::scalar::mhz_to_angular;

    fn grid() -> Vec<f64> {
        linspace(mhz_to_angular(-50.0), mhz_to_angular(50.0), 201)
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Finite-difference check of both analytic Jacobians.
    #[test]
    fn jacobians_match_finite_differences() {
        let eit = Eit { g_rel: 1.5, g21: 1.0, xc: 0.2 };
        type Shape<'a> = &'a dyn Fn(&[f64], f64, Option<&mut [Cplx<f64>]>) -> Cplx<f64>;
        let shapes: [(Shape, [f64; 3]); 2] =
            [(&|p, x, g| TwoLevel.eval(p, x, g), [1.5, 1.0, 0.1]), (&|p, x, g| eit.eval(p, x, g), [0.9, 3.0, -0.2])];
        for (f, p) in shapes {
            for x in [-3.0, -0.5, 0.0, 0.7, 2.5] {
                let mut g = [c(0.0, 0.0); 3];
                f(&p, x, Some(&mut g));
                for a in 0..3 {
                    let h = 1e-6;
                    let mut pp = p;
                    let mut pm = p;
                    pp[a] += h;
                    pm[a] -= h;
                    let fd = (f(&pp, x, None) - f(&pm, x, None)) / (2.0 * h);
                    assert!((fd - g[a]).norm() < 1e-7, "param {a} at {x}: {fd} vs {}", g[a]);
                }
            }
        }
    }

    #[test]
    fn short_trace_rejected() {
        let d: Vec<f64> = (0..5).map(|k| k as f64).collect();
        assert!(matches!(Trace::magnitude(d, vec![1.0; 5]), Err(FitError::BadTrace(_))));
    }

    #[test]
    fn unsorted_trace_rejected() {
        let mut d: Vec<f64> = (0..10).map(|k| k as f64).collect();
        d.swap(3, 4);
        assert!(Trace::magnitude(d, vec![1.0; 10]).is_err());
    }

    #[test]
    fn noiseless_two_level_round_trip() {
        let d = grid();
        let t = two_level_curve(6.9e7, 4.5e7, 0.0, &d);
        let rep = fit_two_level(&Trace::complex(d, t).unwrap()).unwrap();
        assert!(rep.converged);
        assert!(rel(rep.get("gamma_rel_21").unwrap(), 6.9e7) < 1e-6);
        assert!(rel(rep.get("gamma_deph_21").unwrap(), 4.5e7) < 1e-6);
        assert!(rep.iterations <= 200);
    }

    #[test]
    fn magnitude_only_round_trip() {
        let d = grid();
        let t: Vec<f64> = two_level_curve(6.9e7, 4.5e7, 3e6, &d).iter().map(|z| z.norm()).collect();
        let rep = fit_two_level(&Trace::magnitude(d, t).unwrap()).unwrap();
        assert_eq!(rep.domain, Domain::Magnitude);
        assert!(rel(rep.get("gamma_rel_21").unwrap(), 6.9e7) < 1e-6);
        assert!(rel(rep.get("gamma_deph_21").unwrap(), 4.5e7) < 1e-6);
        assert!((rep.get("center_offset").unwrap() - 3e6).abs() < 10.0);
    }

    #[test]
    fn flat_trace_has_no_dip() {
        let d = grid();
        let rep = fit_two_level(&Trace::complex(d.clone(), vec![c(1.0, 0.0); d.len()]).unwrap()).unwrap();
        assert!(rep.warnings.contains(&FitWarning::NoDip));
        assert!(rep.get("gamma_rel_21").unwrap().abs() < 1e-3);
    }

    #[test]
    fn eit_round_trip() {
        let known = KnownRates { gamma_rel_21: 6.9e7, gamma_deph_21: 4.5e7, delta_c: 0.0 };
        let d = linspace(mhz_to_angular(-80.0), mhz_to_angular(80.0), 321);
        let oc = mhz_to_angular(44.0);
        let t = eit_curve(&known, 4.3e7, oc, 1e6, &d);
        let rep = fit_eit(&Trace::complex(d, t).unwrap(), &known).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rel(rep.get("gamma_deph_31").unwrap(), 4.3e7) < 1e-6);
        assert!(rel(rep.get("omega_c_rabi").unwrap(), oc) < 1e-6);
        assert!(rep.warnings.is_empty());
    }

    #[test]
    fn eit_without_control_warns() {
        let known = KnownRates { gamma_rel_21: 6.9e7, gamma_deph_21: 4.5e7, delta_c: 0.0 };
        let d = grid();
        let t = two_level_curve(6.9e7, 4.5e7, 0.0, &d);
        let rep = fit_eit(&Trace::complex(d, t).unwrap(), &known).unwrap();
        assert!(rep.warnings.contains(&FitWarning::Identifiability), "{rep:?}");
    }
}
