//! Subcommand implementations. Each returns the full text to emit.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use ladder_eit::experiments::{contrast, contrast_of, extinction_curve_with, sweep_map, sweep_probe, SweepResult};
use ladder_eit::fit::{
    eit_curve, fit_eit, fit_two_level, two_level_curve, Domain, FitReport, KnownRates, Samples, Trace,
};
use ladder_eit::scalar::angular_to_hz;
use ladder_eit::solver::evolve_observed;
use ladder_eit::{coupling_to_rate, rate_to_coupling, validate_atom, DensityMatrixF64, EvolveConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{echo, FitModel, Origin, RunConfig};
use crate::output::{num, Csv};
use crate::CliError;

/// What a subcommand produced: the data stream and an optional one-line
/// summary for the terminal.
pub struct Output {
    pub body: String,
    pub summary: Option<String>,
}

fn require_valid_atom(cfg: &RunConfig) -> Result<(), CliError> {
    let v = validate_atom(&cfg.atom);
    if v.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = v.iter().map(|v| v.to_string()).collect();
    Err(CliError::Domain(format!("invalid atom parameters: {}", list.join("; "))))
}

fn failures_note(csv: &mut Csv, result: &SweepResult<f64>) {
    for (k, rec) in result.records.iter().enumerate() {
        if let Err(e) = &rec.value {
            csv.comment(&format!("point {k} failed: {e}"));
        }
    }
}

pub fn spectrum(cfg: &RunConfig) -> Result<Output, CliError> {
    require_valid_atom(cfg)?;
    let mut csv = Csv::new(&echo(cfg, "spectrum"));
    let ladder = cfg.omega_c_ladder.clone().unwrap_or_else(|| vec![cfg.drive.omega_c_rabi]);
    let grid = cfg.spectrum.values();
    for (k, oc) in ladder.iter().enumerate() {
        if k > 0 {
            csv.blank();
            csv.blank();
        }
        let drive = ladder_eit::DriveSpecF64 { omega_c_rabi: *oc, ..cfg.drive };
        let result = sweep_probe(&cfg.atom, &drive, &grid, cfg.mode).map_err(|e| CliError::Domain(e.to_string()))?;
        if cfg.omega_c_ladder.is_some() {
            csv.comment(&format!("omega_c_over_2pi_hz = {}", num(angular_to_hz(*oc))));
        }
        csv.header(&["delta_p_over_2pi_hz", "re_t", "im_t", "T"]);
        for rec in &result.records {
            let (re, im, p) = rec.value.as_ref().map_or((f64::NAN, f64::NAN, f64::NAN), |p| (p.t.re, p.t.im, p.power));
            csv.row(&[angular_to_hz(rec.drive.delta_p), re, im, p]);
        }
        failures_note(&mut csv, &result);
    }
    Ok(Output { body: csv.into_string(), summary: None })
}

pub fn map(cfg: &RunConfig) -> Result<Output, CliError> {
    require_valid_atom(cfg)?;
    let result = sweep_map(&cfg.atom, &cfg.drive, &cfg.map_delta_p.values(), &cfg.map_omega_c.values(), cfg.mode)
        .map_err(|e| CliError::Domain(e.to_string()))?;
    let mut csv = Csv::new(&echo(cfg, "map"));
    csv.header(&["omega_c_over_2pi_hz", "delta_p_over_2pi_hz", "T"]);
    for rec in &result.records {
        let p = rec.value.as_ref().map_or(f64::NAN, |p| p.power);
        csv.row(&[angular_to_hz(rec.drive.omega_c_rabi), angular_to_hz(rec.drive.delta_p), p]);
    }
    failures_note(&mut csv, &result);
    Ok(Output { body: csv.into_string(), summary: None })
}

pub fn extinction(cfg: &RunConfig) -> Result<Output, CliError> {
    require_valid_atom(cfg)?;
    let result = extinction_curve_with(&cfg.atom, &cfg.drive, &cfg.extinction.values(), cfg.mode)
        .map_err(|e| CliError::Domain(e.to_string()))?;
    let ideal: Vec<f64> =
        result.ideal.as_ref().map(|v| v.iter().map(|r| *r.as_ref().unwrap_or(&f64::NAN)).collect()).unwrap_or_default();
    let mut csv = Csv::new(&echo(cfg, "extinction"));
    csv.header(&["omega_c_over_2pi_hz", "T", "T_ideal"]);
    for (rec, ti) in result.records.iter().zip(&ideal) {
        let p = rec.value.as_ref().map_or(f64::NAN, |p| p.power);
        csv.row(&[angular_to_hz(rec.drive.omega_c_rabi), p, *ti]);
    }
    failures_note(&mut csv, &result);
    let c = contrast(&result).map_err(|e| CliError::Domain(e.to_string()))?;
    let ci = contrast_of(&ideal).map_err(|e| CliError::Domain(e.to_string()))?;
    let summary = format!("contrast={} contrast_ideal={}", num(c), num(ci));
    csv.comment(&summary);
    Ok(Output { body: csv.into_string(), summary: Some(summary) })
}

pub fn evolve(cfg: &RunConfig) -> Result<Output, CliError> {
    require_valid_atom(cfg)?;
    let e = &cfg.evolve;
    let mut ecfg = EvolveConfig::auto(&cfg.atom, &cfg.drive, e.t_final);
    if let Some(h) = e.step {
        ecfg.step = h;
    }
    let every = if e.sample_every > 0 { e.sample_every } else { (ecfg.step_count() / 200).max(1) };
    let mut csv = Csv::new(&echo(cfg, "evolve"));
    csv.header(&["t_s", "rho11", "rho22", "rho33", "abs_rho21"]);
    let rho0 = DensityMatrixF64::level(e.initial_level);
    evolve_observed(&cfg.atom, &cfg.drive, &rho0, &ecfg, every, |t, rho| {
        let [p1, p2, p3] = rho.populations();
        csv.row(&[t, p1, p2, p3, rho.get(2, 1).norm()]);
    })
    .map_err(|err| CliError::Domain(err.to_string()))?;
    Ok(Output { body: csv.into_string(), summary: None })
}

/// Reads a trace CSV as written by `spectrum` (or any CSV with a
/// `delta_p_over_2pi_hz` column plus `re_t`,`im_t`, or `abs_t`, or `T`;
/// an optional `weight` column). Lines starting with `#` are ignored.
pub fn read_trace(text: &str) -> Result<Trace<f64>, CliError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| CliError::Domain("trace file has no header".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name);
    let det =
        find("delta_p_over_2pi_hz").ok_or_else(|| CliError::Domain("trace lacks delta_p_over_2pi_hz column".into()))?;
    let (re_c, im_c, abs_c, pow_c, w_c) = (find("re_t"), find("im_t"), find("abs_t"), find("T"), find("weight"));
    let mut d = Vec::new();
    let mut z = Vec::new();
    let mut mag = Vec::new();
    let mut w = Vec::new();
    for (lineno, line) in lines {
        if line.trim() == header.trim() {
            return Err(CliError::Domain(format!(
                "trace line {}: file holds several spectra; fit one block at a time",
                lineno + 1
            )));
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |k: usize| -> Result<f64, CliError> {
            cells.get(k).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| {
                CliError::Domain(format!("trace line {}: bad or missing value in column {}", lineno + 1, k + 1))
            })
        };
        d.push(get(det)? * TAU);
        match (re_c, im_c, abs_c, pow_c) {
            (Some(r), Some(i), _, _) => z.push(ladder_eit::Cplx::new(get(r)?, get(i)?)),
            (_, _, Some(a), _) => mag.push(get(a)?),
            (_, _, _, Some(p)) => mag.push(get(p)?.max(0.0).sqrt()),
            _ => return Err(CliError::Domain("trace needs re_t+im_t, abs_t or T columns".into())),
        }
        if let Some(k) = w_c {
            w.push(get(k)?);
        }
    }
    let samples = if z.is_empty() { Samples::Magnitude(mag) } else { Samples::Complex(z) };
    let weights = if w_c.is_some() { Some(w) } else { None };
    Trace::new(d, samples, weights).map_err(|e| CliError::Domain(e.to_string()))
}

fn run_fit(cfg: &RunConfig, trace: &Trace<f64>) -> Result<FitReport<f64>, CliError> {
    let known = KnownRates {
        gamma_rel_21: cfg.atom.gamma_rel_21,
        gamma_deph_21: cfg.atom.gamma_deph_21,
        delta_c: cfg.drive.delta_c,
    };
    match cfg.fit_model {
        FitModel::TwoLevel => fit_two_level(trace),
        FitModel::Eit => fit_eit(trace, &known),
    }
    .map_err(|e| CliError::Domain(e.to_string()))
}

fn model_curve(cfg: &RunConfig, rep: &FitReport<f64>, d: &[f64]) -> Vec<ladder_eit::Cplx<f64>> {
    let g = |k: &str| rep.get(k).unwrap_or(f64::NAN);
    match cfg.fit_model {
        FitModel::TwoLevel => two_level_curve(g("gamma_rel_21"), g("gamma_deph_21"), g("center_offset"), d),
        FitModel::Eit => {
            let known = KnownRates {
                gamma_rel_21: cfg.atom.gamma_rel_21,
                gamma_deph_21: cfg.atom.gamma_deph_21,
                delta_c: cfg.drive.delta_c,
            };
            eit_curve(&known, g("gamma_deph_31"), g("omega_c_rabi"), g("center_offset"), d)
        }
    }
}

/// Residual bootstrap: refit `n` synthetic traces built from the best-fit
/// curve plus residuals resampled with replacement.
fn bootstrap(cfg: &RunConfig, trace: &Trace<f64>, rep: &FitReport<f64>, n: usize) -> Result<Vec<f64>, CliError> {
    let d = trace.detunings();
    let model = model_curve(cfg, rep, d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = rep.estimates.len();
    let mut sums = vec![0.0; k];
    let mut sq = vec![0.0; k];
    for _ in 0..n {
        let idx: Vec<usize> = (0..d.len()).map(|_| rng.random_range(0..d.len())).collect();
        let samples = match trace.samples() {
            Samples::Complex(v) => {
                Samples::Complex(model.iter().zip(&idx).map(|(m, &j)| *m + (v[j] - model[j])).collect())
            }
            Samples::Magnitude(v) => {
                Samples::Magnitude(model.iter().zip(&idx).map(|(m, &j)| m.norm() + (v[j] - model[j].norm())).collect())
            }
        };
        let t = Trace::new(d.to_vec(), samples, None).map_err(|e| CliError::Domain(e.to_string()))?;
        let r = run_fit(cfg, &t)?;
        for (a, e) in r.estimates.iter().enumerate() {
            sums[a] += e.value;
            sq[a] += e.value * e.value;
        }
    }
    let nf = n as f64;
    Ok((0..k)
        .map(|a| {
            let mean = sums[a] / nf;
            (sq[a] / nf - mean * mean).max(0.0).sqrt()
        })
        .collect())
}

pub fn fit(cfg: &RunConfig, trace_text: &str) -> Result<Output, CliError> {
    let trace = read_trace(trace_text)?;
    let rep = run_fit(cfg, &trace)?;
    let spread = if cfg.bootstrap > 0 { Some(bootstrap(cfg, &trace, &rep, cfg.bootstrap)?) } else { None };

    let mut out = echo(cfg, "fit");
    let domain = match rep.domain {
        Domain::Complex => "complex t (real and imaginary residuals)",
        Domain::Magnitude => "|t| only",
    };
    let _ =
        writeln!(out, "Fit of {} line shape to {} samples of {domain}", cfg.fit_model.name(), trace.detunings().len());
    let _ = writeln!(
        out,
        "{} after {} iterations, residual norm {}",
        if rep.converged { "Converged" } else { "NOT converged" },
        rep.iterations,
        num(rep.residual_norm)
    );
    for e in &rep.estimates {
        let _ = writeln!(
            out,
            "  {:<14} = {} ± {}   (/2π = {} Hz)",
            e.name,
            num(e.value),
            num(e.uncertainty),
            num(angular_to_hz(e.value))
        );
    }
    let _ = writeln!(out, "Uncertainties: {}", ladder_eit::fit::UNCERTAINTY_METHOD);
    for w in &rep.warnings {
        let _ = writeln!(out, "Warning: {w:?}");
    }
    let _ = writeln!(out, "[result]");
    let _ = writeln!(out, "model={}", cfg.fit_model.name());
    let _ = writeln!(out, "domain={}", rep.domain.name());
    let _ = writeln!(out, "converged={}", rep.converged);
    let _ = writeln!(out, "iterations={}", rep.iterations);
    let _ = writeln!(out, "residual_norm={}", num(rep.residual_norm));
    let _ = writeln!(out, "gradient_norm={}", num(rep.gradient_norm));
    for (a, e) in rep.estimates.iter().enumerate() {
        let _ = writeln!(out, "{}={}", e.name, num(e.value));
        let _ = writeln!(out, "{}_sigma={}", e.name, num(e.uncertainty));
        if let Some(s) = &spread {
            let _ = writeln!(out, "{}_bootstrap_sigma={}", e.name, num(s[a]));
        }
    }
    let warnings: Vec<String> = rep.warnings.iter().map(|w| format!("{w:?}")).collect();
    let _ = writeln!(out, "warnings={}", warnings.join(";"));
    Ok(Output { body: out, summary: None })
}

pub fn atom_info(cfg: &RunConfig) -> Result<Output, CliError> {
    let a = &cfg.atom;
    let origin = |k: &str| cfg.origins.get(k).copied().unwrap_or(Origin::Config).name();
    let mut out = echo(cfg, "atom-info");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}={v}");
    };
    kv("gamma_rel_21", num(a.gamma_rel_21));
    kv("gamma_rel_21_origin", origin("gamma_rel_21").into());
    kv("gamma_rel_21_over_2pi_hz", num(angular_to_hz(a.gamma_rel_21)));
    let m_from_rate = rate_to_coupling(a.gamma_rel_21, a.persistent_current, a.omega21, a.line_impedance);
    let rate_from_m = coupling_to_rate(a.mutual_inductance, a.persistent_current, a.omega21, a.line_impedance);
    kv("mutual_inductance", num(a.mutual_inductance));
    kv("mutual_inductance_origin", origin("mutual_inductance").into());
    kv("mutual_inductance_from_rate", num(m_from_rate));
    kv("gamma_rel_21_from_coupling", num(rate_from_m));
    kv("coupling_rate_mismatch", num((rate_from_m - a.gamma_rel_21) / a.gamma_rel_21));
    kv("dipole_21_wb", num(a.dipole_21()));
    kv("dipole_32_wb", num(a.dipole_32()));
    kv("gamma_rel_32", num(a.gamma_rel_32));
    kv("gamma_rel_32_origin", origin("gamma_rel_32").into());
    kv("gamma_deph_32", num(a.gamma_deph_32));
    kv("gamma_deph_32_origin", origin("gamma_deph_32").into());
    kv("radiative_bound_21", num(a.gamma_rel_21 / 2.0));
    kv("radiative_bound_31", num(a.gamma_rel_32 / 2.0));
    kv("radiative_bound_32", num((a.gamma_rel_21 + a.gamma_rel_32) / 2.0));
    kv("pure_dephasing_21", num(a.gamma_deph_21 - a.gamma_rel_21 / 2.0));
    let violations = validate_atom(a);
    kv("violations", violations.len().to_string());
    for v in &violations {
        kv("violation", v.to_string());
    }
    Ok(Output { body: out, summary: None })
}
