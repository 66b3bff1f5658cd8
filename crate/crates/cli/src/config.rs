//! Run configuration: a TOML file of flat `key = value` sections.
//!
//! Frequencies and rates are given in rad/s (or 1/s) under their plain
//! name, or as `value/2π` in MHz under the same name with a `_mhz` suffix
//! (`omega_c_rabi_mhz = 44` means Ω_c = 2π·44 MHz). Unknown sections and
//! keys are rejected with the offending line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use ladder_eit::experiments::Mode;
use ladder_eit::scalar::mhz_to_angular;
use ladder_eit::{rate_to_coupling, AtomSpecF64, DriveSpecF64};
use toml::Spanned;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

type Raw = BTreeMap<String, Spanned<BTreeMap<String, Spanned<toml::Value>>>>;

/// Where an atom parameter's value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Config,
    Default,
    Derived,
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::Config => "config",
            Origin::Default => "default",
            Origin::Derived => "derived",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        ladder_eit::experiments::linspace(self.min, self.max, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Copy)]
pub enum FitModel {
    TwoLevel,
    Eit,
}

impl FitModel {
    pub fn name(self) -> &'static str {
        match self {
            FitModel::TwoLevel => "two_level",
            FitModel::Eit => "eit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveSettings {
    pub initial_level: usize,
    pub t_final: f64,
    pub step: Option<f64>,
    pub sample_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub atom: AtomSpecF64,
    pub origins: BTreeMap<&'static str, Origin>,
    pub drive: DriveSpecF64,
    pub spectrum: Grid,
    pub omega_c_ladder: Option<Vec<f64>>,
    pub map_delta_p: Grid,
    pub map_omega_c: Grid,
    pub extinction: Grid,
    pub evolve: EvolveSettings,
    pub fit_model: FitModel,
    pub bootstrap: usize,
    pub mode: Mode,
    pub seed: u64,
}

const SECTIONS: &[&str] = &["atom", "drive", "spectrum", "map", "extinction", "evolve", "fit", "run"];

struct Section<'a> {
    name: &'static str,
    table: Option<&'a BTreeMap<String, Spanned<toml::Value>>>,
    used: BTreeSet<String>,
    src: &'a str,
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

impl<'a> Section<'a> {
    fn err(&self, key: &str, message: String) -> ConfigError {
        let line = self.table.and_then(|t| t.get(key)).map(|v| line_of(self.src, v.span().start));
        ConfigError { line, message: format!("[{}] {key}: {message}", self.name) }
    }

    fn raw(&mut self, key: &str) -> Option<&'a Spanned<toml::Value>> {
        let v = self.table?.get(key)?;
        self.used.insert(key.to_string());
        Some(v)
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let x = match v.get_ref() {
            toml::Value::Float(f) => *f,
            toml::Value::Integer(i) => *i as f64,
            other => return Err(self.err(key, format!("expected a number, found {}", other.type_str()))),
        };
        if !x.is_finite() {
            return Err(self.err(key, "value must be finite".into()));
        }
        Ok(Some(x))
    }

    /// `key` in rad/s or `key_mhz` as value/2π in MHz.
    fn angular(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        let mhz_key = format!("{key}_mhz");
        let plain = self.number(key)?;
        let mhz = self.number(&mhz_key)?;
        match (plain, mhz) {
            (Some(_), Some(_)) => Err(self.err(&mhz_key, format!("both {key} and {mhz_key} given"))),
            (Some(v), None) => Ok(Some(v)),
            (None, Some(v)) => Ok(Some(mhz_to_angular(v))),
            (None, None) => Ok(None),
        }
    }

    fn angular_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let mhz_key = format!("{key}_mhz");
        let (k, scale_mhz) = match (
            self.table.is_some_and(|t| t.contains_key(key)),
            self.table.is_some_and(|t| t.contains_key(&mhz_key)),
        ) {
            (true, true) => return Err(self.err(&mhz_key, format!("both {key} and {mhz_key} given"))),
            (true, false) => (key.to_string(), false),
            (false, true) => (mhz_key, true),
            (false, false) => return Ok(None),
        };
        let v = self.raw(&k).expect("checked above");
        let toml::Value::Array(items) = v.get_ref() else {
            return Err(self.err(&k, "expected an array of numbers".into()));
        };
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            let x = match item {
                toml::Value::Float(f) => *f,
                toml::Value::Integer(i) => *i as f64,
                _ => return Err(self.err(&k, "expected an array of numbers".into())),
            };
            out.push(if scale_mhz { mhz_to_angular(x) } else { x });
        }
        Ok(Some(out))
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        match v.get_ref() {
            toml::Value::Integer(i) if *i >= 0 => Ok(Some(*i as usize)),
            _ => Err(self.err(key, "expected a non-negative integer".into())),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        match v.get_ref() {
            toml::Value::String(s) => Ok(Some(s.clone())),
            other => Err(self.err(key, format!("expected a string, found {}", other.type_str()))),
        }
    }

    fn grid(&mut self, prefix: &str, points_key: &str, default: Grid) -> Result<Grid, ConfigError> {
        let min = self.angular(&format!("{prefix}_min"))?.unwrap_or(default.min);
        let max = self.angular(&format!("{prefix}_max"))?.unwrap_or(default.max);
        let points = self.count(points_key)?.unwrap_or(default.points);
        if points == 0 || (points > 1 && !(max > min)) {
            return Err(self.err(points_key, format!("{prefix} grid must have points ≥ 1 and max > min")));
        }
        Ok(Grid { min, max, points })
    }

    fn finish(self) -> Result<(), ConfigError> {
        let Some(t) = self.table else { return Ok(()) };
        for (k, v) in t {
            if !self.used.contains(k) {
                return Err(ConfigError {
                    line: Some(line_of(self.src, v.span().start)),
                    message: format!("[{}] unknown key `{k}`", self.name),
                });
            }
        }
        Ok(())
    }
}

fn grid_mhz(min: f64, max: f64, points: usize) -> Grid {
    Grid { min: mhz_to_angular(min), max: mhz_to_angular(max), points }
}

type Origins = BTreeMap<&'static str, Origin>;

fn pick(
    s: &mut Section,
    origins: &mut Origins,
    key: &'static str,
    fallback: Option<f64>,
) -> Result<Option<f64>, ConfigError> {
    match s.angular(key)? {
        Some(v) => {
            origins.insert(key, Origin::Config);
            Ok(Some(v))
        }
        None => {
            if fallback.is_some() {
                origins.insert(key, Origin::Default);
            }
            Ok(fallback)
        }
    }
}

fn plain(s: &mut Section, origins: &mut Origins, key: &'static str, fallback: f64) -> Result<f64, ConfigError> {
    Ok(match s.number(key)? {
        Some(v) => {
            origins.insert(key, Origin::Config);
            v
        }
        None => {
            origins.insert(key, Origin::Default);
            fallback
        }
    })
}

pub fn parse(src: &str) -> Result<RunConfig, ConfigError> {
    let raw: Raw = toml::from_str(src)
        .map_err(|e| ConfigError { line: e.span().map(|s| line_of(src, s.start)), message: e.message().to_string() })?;
    for (name, table) in &raw {
        if !SECTIONS.contains(&name.as_str()) {
            return Err(ConfigError {
                line: Some(line_of(src, table.span().start)),
                message: format!("unknown section [{name}]"),
            });
        }
    }
    let section =
        |name: &'static str| Section { name, table: raw.get(name).map(|t| t.get_ref()), used: BTreeSet::new(), src };

    let reference = AtomSpecF64::reference();
    let mut origins = BTreeMap::new();
    let mut s = section("atom");
    let omega21 = pick(&mut s, &mut origins, "omega21", Some(reference.omega21))?.unwrap_or_default();
    let omega32 = pick(&mut s, &mut origins, "omega32", Some(reference.omega32))?.unwrap_or_default();
    let gamma_rel_21_cfg = pick(&mut s, &mut origins, "gamma_rel_21", None)?;
    let gamma_deph_21 = pick(&mut s, &mut origins, "gamma_deph_21", Some(reference.gamma_deph_21))?.unwrap_or_default();
    let gamma_deph_31 = pick(&mut s, &mut origins, "gamma_deph_31", Some(reference.gamma_deph_31))?.unwrap_or_default();
    let gamma_rel_32_cfg = pick(&mut s, &mut origins, "gamma_rel_32", None)?;
    let gamma_deph_32_cfg = pick(&mut s, &mut origins, "gamma_deph_32", None)?;
    let zeta_21 = plain(&mut s, &mut origins, "zeta_21", reference.zeta_21)?;
    let zeta_32 = plain(&mut s, &mut origins, "zeta_32", reference.zeta_32)?;
    let persistent_current = plain(&mut s, &mut origins, "persistent_current", reference.persistent_current)?;
    let line_impedance = plain(&mut s, &mut origins, "line_impedance", reference.line_impedance)?;
    let mutual_cfg = s.number("mutual_inductance")?;
    s.finish()?;

    let (gamma_rel_21, mutual_inductance) = match (gamma_rel_21_cfg, mutual_cfg) {
        (Some(g), Some(m)) => {
            origins.insert("mutual_inductance", Origin::Config);
            (g, m)
        }
        (Some(g), None) => {
            origins.insert("mutual_inductance", Origin::Derived);
            (g, rate_to_coupling(g, persistent_current, omega21, line_impedance))
        }
        (None, Some(m)) => {
            origins.insert("mutual_inductance", Origin::Config);
            origins.insert("gamma_rel_21", Origin::Derived);
            (ladder_eit::coupling_to_rate(m, persistent_current, omega21, line_impedance), m)
        }
        (None, None) => {
            origins.insert("gamma_rel_21", Origin::Default);
            origins.insert("mutual_inductance", Origin::Derived);
            (
                reference.gamma_rel_21,
                rate_to_coupling(reference.gamma_rel_21, persistent_current, omega21, line_impedance),
            )
        }
    };
    let gamma_rel_32 = gamma_rel_32_cfg.unwrap_or_else(|| {
        origins.insert("gamma_rel_32", Origin::Default);
        AtomSpecF64::default_gamma_rel_32(gamma_rel_21, gamma_deph_31)
    });
    let gamma_deph_32 = gamma_deph_32_cfg.unwrap_or_else(|| {
        origins.insert("gamma_deph_32", Origin::Default);
        AtomSpecF64::default_gamma_deph_32(gamma_deph_21, gamma_deph_31)
    });
    let atom = AtomSpecF64 {
        omega21,
        omega32,
        gamma_rel_21,
        gamma_rel_32,
        gamma_deph_21,
        gamma_deph_31,
        gamma_deph_32,
        zeta_21,
        zeta_32,
        mutual_inductance,
        persistent_current,
        line_impedance,
    };

    let mut s = section("drive");
    let drive = DriveSpecF64 {
        omega_p_rabi: s.angular("omega_p_rabi")?.unwrap_or(mhz_to_angular(2.0)),
        omega_c_rabi: s.angular("omega_c_rabi")?.unwrap_or(0.0),
        delta_p: s.angular("delta_p")?.unwrap_or(0.0),
        delta_c: s.angular("delta_c")?.unwrap_or(0.0),
    };
    if let Err(e) = drive.validate() {
        return Err(
            s.err(if e.to_string().starts_with("omega_p") { "omega_p_rabi" } else { "omega_c_rabi" }, e.to_string())
        );
    }
    s.finish()?;

    let mut s = section("spectrum");
    let spectrum = s.grid("delta_p", "points", grid_mhz(-50.0, 50.0, 201))?;
    let omega_c_ladder = s.angular_list("omega_c_ladder")?;
    if let Some(l) = &omega_c_ladder {
        if l.is_empty() || l.iter().any(|v| !(*v >= 0.0)) {
            return Err(s.err("omega_c_ladder_mhz", "ladder must be non-empty and non-negative".into()));
        }
    }
    s.finish()?;

    let mut s = section("map");
    let map_delta_p = s.grid("delta_p", "delta_p_points", grid_mhz(-100.0, 100.0, 201))?;
    let map_omega_c = s.grid("omega_c", "omega_c_points", grid_mhz(0.0, 100.0, 51))?;
    s.finish()?;

    let mut s = section("extinction");
    let extinction = s.grid("omega_c", "points", grid_mhz(0.0, 100.0, 101))?;
    s.finish()?;

    let mut s = section("evolve");
    let initial_level = s.count("initial_level")?.unwrap_or(1);
    if !(1..=3).contains(&initial_level) {
        return Err(s.err("initial_level", "must be 1, 2 or 3".into()));
    }
    let t_final = s.number("t_final")?.unwrap_or(200.0 / atom.gamma_rel_21.max(1.0));
    let step = s.number("step")?;
    let sample_every = s.count("sample_every")?.unwrap_or(0);
    if !(t_final >= 0.0) {
        return Err(s.err("t_final", "must be non-negative".into()));
    }
    if step.is_some_and(|h| !(h > 0.0)) {
        return Err(s.err("step", "must be positive".into()));
    }
    s.finish()?;

    let mut s = section("fit");
    let fit_model = match s.string("model")?.as_deref() {
        None | Some("two_level") => FitModel::TwoLevel,
        Some("eit") => FitModel::Eit,
        Some(other) => return Err(s.err("model", format!("unknown model `{other}` (two_level | eit)"))),
    };
    let bootstrap = s.count("bootstrap")?.unwrap_or(0);
    s.finish()?;

    let mut s = section("run");
    let mode = match s.string("mode")?.as_deref() {
        None | Some("analytic") => Mode::WeakProbeAnalytic,
        Some("numeric") => Mode::FullNumeric,
        Some(other) => return Err(s.err("mode", format!("unknown mode `{other}` (analytic | numeric)"))),
    };
    let seed = s.count("seed")?.unwrap_or(0) as u64;
    s.finish()?;

    Ok(RunConfig {
        atom,
        origins,
        drive,
        spectrum,
        omega_c_ladder,
        map_delta_p,
        map_omega_c,
        extinction,
        evolve: EvolveSettings { initial_level, t_final, step, sample_every },
        fit_model,
        bootstrap,
        mode,
        seed,
    })
}

/// Full resolved configuration as `#`-prefixed lines.
pub fn echo(cfg: &RunConfig, command: &str) -> String {
    let a = &cfg.atom;
    let origin = |k: &str| cfg.origins.get(k).copied().unwrap_or(Origin::Config).name();
    let mut out = String::new();
    let _ = writeln!(out, "# ladder-eit {} {command}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# units: angular rad/s for frequencies and rates, SI otherwise");
    for (k, v) in [
        ("omega21", a.omega21),
        ("omega32", a.omega32),
        ("gamma_rel_21", a.gamma_rel_21),
        ("gamma_rel_32", a.gamma_rel_32),
        ("gamma_deph_21", a.gamma_deph_21),
        ("gamma_deph_31", a.gamma_deph_31),
        ("gamma_deph_32", a.gamma_deph_32),
        ("zeta_21", a.zeta_21),
        ("zeta_32", a.zeta_32),
        ("mutual_inductance", a.mutual_inductance),
        ("persistent_current", a.persistent_current),
        ("line_impedance", a.line_impedance),
    ] {
        let _ = writeln!(out, "# atom.{k} = {} ({})", crate::output::num(v), origin(k));
    }
    let d = &cfg.drive;
    for (k, v) in [
        ("omega_p_rabi", d.omega_p_rabi),
        ("omega_c_rabi", d.omega_c_rabi),
        ("delta_p", d.delta_p),
        ("delta_c", d.delta_c),
    ] {
        let _ = writeln!(out, "# drive.{k} = {}", crate::output::num(v));
    }
    let grid = |out: &mut String, name: &str, g: &Grid| {
        let _ = writeln!(
            out,
            "# {name} = {} .. {} ({} points)",
            crate::output::num(g.min),
            crate::output::num(g.max),
            g.points
        );
    };
    grid(&mut out, "spectrum.delta_p", &cfg.spectrum);
    if let Some(l) = &cfg.omega_c_ladder {
        let items: Vec<String> = l.iter().map(|v| crate::output::num(*v)).collect();
        let _ = writeln!(out, "# spectrum.omega_c_ladder = [{}]", items.join(", "));
    }
    grid(&mut out, "map.delta_p", &cfg.map_delta_p);
    grid(&mut out, "map.omega_c", &cfg.map_omega_c);
    grid(&mut out, "extinction.omega_c", &cfg.extinction);
    let e = &cfg.evolve;
    let _ = writeln!(
        out,
        "# evolve.initial_level = {}, t_final = {}, step = {}, sample_every = {}",
        e.initial_level,
        crate::output::num(e.t_final),
        e.step.map_or("auto".to_string(), crate::output::num),
        e.sample_every
    );
    let _ = writeln!(out, "# fit.model = {}, fit.bootstrap = {}", cfg.fit_model.name(), cfg.bootstrap);
    let _ = writeln!(out, "# run.mode = {}, run.seed = {}", cfg.mode.name(), cfg.seed);
    out
}
