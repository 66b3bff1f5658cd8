//! Parameter sweeps over the drive: probe spectra, control-amplitude maps
//! and resonant extinction curves, plus the two figures of merit read off
//! them (power contrast and Autler-Townes dip positions).
//!
//! Points are evaluated independently on the current rayon pool. Each
//! point's value depends only on its own drive, so results are identical
//! for any pool size.

use rayon::prelude::*;
use thiserror::Error;

use crate::atom::{AtomSpec, DriveSpec};
use crate::scalar::Real;
use crate::scattering::{
    power_transmission_ideal, transmission_numeric, transmission_weak_probe, ScatteringError, ScatteringPoint,
};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// How transmission is evaluated at each grid point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Closed-form weak-probe transmission.
    WeakProbeAnalytic,
    /// Stationary master equation at the configured probe amplitude.
    FullNumeric,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::WeakProbeAnalytic => "weak_probe_analytic",
            Mode::FullNumeric => "full_numeric",
        }
    }
}

/// Drive parameter varied along a sweep axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AxisKind {
    DeltaP,
    DeltaC,
    OmegaC,
    OmegaP,
}

impl AxisKind {
    pub fn name(self) -> &'static str {
        match self {
            AxisKind::DeltaP => "delta_p",
            AxisKind::DeltaC => "delta_c",
            AxisKind::OmegaC => "omega_c_rabi",
            AxisKind::OmegaP => "omega_p_rabi",
        }
    }

    fn apply<T: Real>(self, drive: &mut DriveSpec<T>, value: T) {
        match self {
            AxisKind::DeltaP => drive.delta_p = value,
            AxisKind::DeltaC => drive.delta_c = value,
            AxisKind::OmegaC => drive.omega_c_rabi = value,
            AxisKind::OmegaP => drive.omega_p_rabi = value,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis<T: Real> {
    pub kind: AxisKind,
    /// Strictly increasing, rad/s.
    pub values: Vec<T>,
}

impl<T: Real> Axis<T> {
    pub fn new(kind: AxisKind, values: Vec<T>) -> Result<Self, SweepError> {
        if values.is_empty() {
            return Err(SweepError::InvalidGrid(kind.name(), "empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SweepError::InvalidGrid(kind.name(), "non-finite value"));
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SweepError::InvalidGrid(kind.name(), "values not strictly increasing"));
        }
        Ok(Self { kind, values })
    }

    /// `n` evenly spaced values from `lo` to `hi` inclusive.
    pub fn linspace(kind: AxisKind, lo: T, hi: T, n: usize) -> Result<Self, SweepError> {
        Self::new(kind, linspace(lo, hi, n))
    }
}

pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let last = T::from_usize(n - 1).unwrap_or(T::one());
            (0..n)
                .map(|k| {
                    let f = T::from_usize(k).unwrap_or(T::zero()) / last;
                    lo + (hi - lo) * f
                })
                .collect()
        }
    }
}

/// One or two sweep axes; records are laid out with `axis1` varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid<T: Real> {
    pub axis1: Axis<T>,
    pub axis2: Option<Axis<T>>,
    pub mode: Mode,
}

impl<T: Real> SweepGrid<T> {
    pub fn len(&self) -> usize {
        self.axis1.values.len() * self.axis2.as_ref().map_or(1, |a| a.values.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn drives(&self, base: &DriveSpec<T>) -> Vec<DriveSpec<T>> {
        let outer: Vec<Option<T>> = match &self.axis2 {
            Some(a) => a.values.iter().map(|v| Some(*v)).collect(),
            None => vec![None],
        };
        let mut out = Vec::with_capacity(self.len());
        for o in outer {
            for v in &self.axis1.values {
                let mut d = *base;
                if let (Some(a2), Some(o)) = (&self.axis2, o) {
                    a2.kind.apply(&mut d, o);
                }
                self.axis1.kind.apply(&mut d, *v);
                out.push(d);
            }
        }
        out
    }
}

/// Inputs a sweep was computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance<T: Real> {
    pub atom: AtomSpec<T>,
    pub base_drive: DriveSpec<T>,
    pub mode: Mode,
    pub code_version: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord<T: Real> {
    pub drive: DriveSpec<T>,
    /// A failed point is kept as its error; the sweep carries on.
    pub value: Result<ScatteringPoint<T>, ScatteringError>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult<T: Real> {
    pub grid: SweepGrid<T>,
    pub records: Vec<SweepRecord<T>>,
    pub provenance: Provenance<T>,
    /// Companion no-pure-dephasing curve, present on extinction curves.
    pub ideal: Option<Vec<Result<T, ScatteringError>>>,
}

impl<T: Real> SweepResult<T> {
    /// Power transmission per record, NaN for failed points.
    pub fn powers(&self) -> Vec<T> {
        self.records.iter().map(|r| r.value.as_ref().map_or(T::nan(), |p| p.power)).collect()
    }

    /// Records of the `k`-th outer-axis value (the whole sweep when 1D).
    pub fn row(&self, k: usize) -> &[SweepRecord<T>] {
        let n = self.grid.axis1.values.len();
        &self.records[k * n..(k + 1) * n]
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.value.is_err()).count()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("invalid grid for {0}: {1}")]
    InvalidGrid(&'static str, &'static str),
    #[error("sweep has no valid points")]
    EmptySweep,
    #[error("dip splitting needs a one-dimensional probe-detuning sweep")]
    NotProbeSweep,
    #[error("dips at {0} and {1} are within two grid steps; refine the grid")]
    GridTooCoarse(usize, usize),
}

fn evaluate<T: Real>(
    atom: &AtomSpec<T>,
    drive: &DriveSpec<T>,
    mode: Mode,
) -> Result<ScatteringPoint<T>, ScatteringError> {
    match mode {
        Mode::WeakProbeAnalytic => transmission_weak_probe(atom, drive),
        Mode::FullNumeric => transmission_numeric(atom, drive),
    }
}

/// Evaluates every grid point.
pub fn run_sweep<T: Real>(atom: &AtomSpec<T>, base_drive: &DriveSpec<T>, grid: SweepGrid<T>) -> SweepResult<T> {
    let mode = grid.mode;
    let records = grid
        .drives(base_drive)
        .into_par_iter()
        .map(|drive| SweepRecord { value: evaluate(atom, &drive, mode), drive })
        .collect();
    SweepResult {
        grid,
        records,
        provenance: Provenance { atom: *atom, base_drive: *base_drive, mode, code_version: CODE_VERSION },
        ideal: None,
    }
}

/// Transmission spectrum versus probe detuning at fixed control drive.
pub fn sweep_probe<T: Real>(
    atom: &AtomSpec<T>,
    base_drive: &DriveSpec<T>,
    delta_p_grid: &[T],
    mode: Mode,
) -> Result<SweepResult<T>, SweepError> {
    let grid = SweepGrid { axis1: Axis::new(AxisKind::DeltaP, delta_p_grid.to_vec())?, axis2: None, mode };
    Ok(run_sweep(atom, base_drive, grid))
}

/// Two-dimensional map over probe detuning (fast axis) and control
/// amplitude (slow axis).
pub fn sweep_map<T: Real>(
    atom: &AtomSpec<T>,
    base_drive: &DriveSpec<T>,
    delta_p_grid: &[T],
    omega_c_grid: &[T],
    mode: Mode,
) -> Result<SweepResult<T>, SweepError> {
    let grid = SweepGrid {
        axis1: Axis::new(AxisKind::DeltaP, delta_p_grid.to_vec())?,
        axis2: Some(Axis::new(AxisKind::OmegaC, omega_c_grid.to_vec())?),
        mode,
    };
    Ok(run_sweep(atom, base_drive, grid))
}

/// Resonant (`δω_p = δω_c = 0`) transmission versus control amplitude from
/// the closed-form weak-probe expression, with the ideal curve attached.
pub fn extinction_curve<T: Real>(atom: &AtomSpec<T>, omega_c_grid: &[T]) -> Result<SweepResult<T>, SweepError> {
    extinction_curve_with(atom, &DriveSpec::default(), omega_c_grid, Mode::WeakProbeAnalytic)
}

/// [`extinction_curve`] with an explicit mode; `base_drive` supplies the
/// probe amplitude for [`Mode::FullNumeric`]. Its detunings are ignored.
pub fn extinction_curve_with<T: Real>(
    atom: &AtomSpec<T>,
    base_drive: &DriveSpec<T>,
    omega_c_grid: &[T],
    mode: Mode,
) -> Result<SweepResult<T>, SweepError> {
    let base = DriveSpec { delta_p: T::zero(), delta_c: T::zero(), ..*base_drive };
    let grid = SweepGrid { axis1: Axis::new(AxisKind::OmegaC, omega_c_grid.to_vec())?, axis2: None, mode };
    let mut result = run_sweep(atom, &base, grid);
    result.ideal = Some(
        omega_c_grid.iter().map(|&oc| power_transmission_ideal(oc, atom.gamma_rel_21, atom.gamma_deph_31)).collect(),
    );
    Ok(result)
}

/// Power contrast `(T_max − T_min)/T_max` over the valid points of a sweep.
pub fn contrast<T: Real>(result: &SweepResult<T>) -> Result<T, SweepError> {
    contrast_of(&result.powers())
}

/// [`contrast`] over raw power values; NaNs are skipped.
pub fn contrast_of<T: Real>(powers: &[T]) -> Result<T, SweepError> {
    let mut it = powers.iter().copied().filter(|p| !p.is_nan());
    let first = it.next().ok_or(SweepError::EmptySweep)?;
    let (lo, hi) = it.fold((first, first), |(lo, hi), p| (lo.min(p), hi.max(p)));
    if hi == T::zero() {
        return Ok(T::zero());
    }
    Ok((hi - lo) / hi)
}

/// Outcome of the dip search on a probe spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Splitting<T: Real> {
    /// Two transmission minima, probe detunings in rad/s, `lower < upper`.
    Split {
        lower: T,
        upper: T,
    },
    NoSplit,
}

impl<T: Real> Splitting<T> {
    pub fn separation(&self) -> Option<T> {
        match self {
            Splitting::Split { lower, upper } => Some(*upper - *lower),
            Splitting::NoSplit => None,
        }
    }
}

/// Locates the Autler-Townes pair in a probe spectrum: interior local minima
/// of `T(δω_p)`, refined by the vertex of the parabola through each minimum
/// and its neighbours. With more than two minima the two deepest are taken.
pub fn dip_splitting<T: Real>(result: &SweepResult<T>) -> Result<Splitting<T>, SweepError> {
    if result.grid.axis2.is_some() || result.grid.axis1.kind != AxisKind::DeltaP {
        return Err(SweepError::NotProbeSweep);
    }
    dip_positions(&result.grid.axis1.values, &result.powers())
}

/// [`dip_splitting`] on raw `(x, y)` samples.
pub fn dip_positions<T: Real>(x: &[T], y: &[T]) -> Result<Splitting<T>, SweepError> {
    let n = x.len().min(y.len());
    let mut minima: Vec<usize> = (1..n.saturating_sub(1)).filter(|&i| y[i] < y[i - 1] && y[i] <= y[i + 1]).collect();
    if minima.len() < 2 {
        return Ok(Splitting::NoSplit);
    }
    minima.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).unwrap_or(std::cmp::Ordering::Equal));
    let (mut a, mut b) = (minima[0], minima[1]);
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    if b - a <= 2 {
        return Err(SweepError::GridTooCoarse(a, b));
    }
    Ok(Splitting::Split { lower: parabolic_vertex(x, y, a), upper: parabolic_vertex(x, y, b) })
}

/// Abscissa of the vertex of the parabola through points `i−1, i, i+1`.
fn parabolic_vertex<T: Real>(x: &[T], y: &[T], i: usize) -> T {
    let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let two = T::lit(2.0);
    let num = (x1 - x0) * (x1 - x0) * (y1 - y2) - (x1 - x2) * (x1 - x2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if den == T::zero() {
        return x1;
    }
    let v = x1 - num / (two * den);
    // Stay within the bracketing interval.
    v.max(x0).min(x2)
}
