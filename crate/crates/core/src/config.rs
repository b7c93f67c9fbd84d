//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Later assignments win, so a
//! preset followed by command-line overrides is just two calls to
//! [`RunConfig::apply_text`] / [`RunConfig::set`].

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ring::RingGeometry;
use crate::spectrum::ModeLabel;

/// What a run computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Static,
    Floquet,
    Evolve,
    Fourier,
    Revival,
    BesselDebug,
}

impl RunMode {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "static" | "spectrum" => RunMode::Static,
            "floquet" => RunMode::Floquet,
            "evolve" => RunMode::Evolve,
            "fourier" => RunMode::Fourier,
            "revival" => RunMode::Revival,
            "bessel-debug" => RunMode::BesselDebug,
            other => return Err(Error::param("mode", format!("unknown mode `{other}`"))),
        })
    }

    pub fn is_dynamic(self) -> bool {
        matches!(self, RunMode::Evolve | RunMode::Fourier | RunMode::Revival)
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::Static => "static",
            RunMode::Floquet => "floquet",
            RunMode::Evolve => "evolve",
            RunMode::Fourier => "fourier",
            RunMode::Revival => "revival",
            RunMode::BesselDebug => "bessel-debug",
        })
    }
}

/// Basis used to expand the initial state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisChoice {
    Static,
    Floquet,
}

/// Initial state of a dynamic run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StateChoice {
    /// Superposition of named basis modes.
    Modes,
    /// Gaussian packet with a radial `sin` envelope.
    Gaussian,
}

/// Validated run configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: RunMode,
    pub rho: f64,
    /// `ω/Ω` for the static problem.
    pub soi: Option<f64>,
    /// Drive `ω(τ) = b + a cos ντ`.
    pub a: f64,
    pub b: f64,
    pub nu: Option<f64>,
    pub m_min: i32,
    pub m_max: i32,
    pub eps_max: Option<f64>,
    pub k_max: Option<f64>,

    pub basis: BasisChoice,
    pub state: StateChoice,
    pub modes: Vec<String>,
    pub amplitudes: Vec<f64>,
    pub r_c: f64,
    pub phi_c: f64,
    pub sigma_r: f64,
    pub sigma_phi: f64,
    pub spin_up: f64,
    pub spin_down: f64,

    pub dt: f64,
    pub tau_end: f64,
    pub snapshots: Vec<f64>,
    pub probe_r: f64,
    pub probe_phi: f64,
    pub observable: String,
    pub average_window: Option<f64>,
    pub harmonics: usize,
    pub window: String,
    pub max_frequency: Option<f64>,
    pub peak_threshold: f64,
    pub autocorrelation: bool,
    pub profiles: bool,

    pub quadrature_order: usize,
    pub n_phi: Option<usize>,
    pub root_tol: f64,
    pub norm_tolerance: f64,
    /// Smallest acceptable captured norm of a truncated expansion.
    pub norm_floor: f64,
    pub sideband_cutoff: Option<usize>,

    pub x_min: f64,
    pub x_max: f64,
    pub samples: usize,

    #[serde(skip)]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: RunMode::Static,
            rho: 0.6,
            soi: None,
            a: 0.0,
            b: 0.0,
            nu: None,
            m_min: -4,
            m_max: 4,
            eps_max: None,
            k_max: None,
            basis: BasisChoice::Static,
            state: StateChoice::Modes,
            modes: Vec::new(),
            amplitudes: Vec::new(),
            r_c: 0.8,
            phi_c: 0.0,
            sigma_r: 0.1,
            sigma_phi: 0.5,
            spin_up: 1.0,
            spin_down: 1.0,
            dt: 0.01,
            tau_end: 10.0,
            snapshots: Vec::new(),
            probe_r: 0.75,
            probe_phi: 0.0,
            observable: "density".into(),
            average_window: None,
            harmonics: 6,
            window: "rect".into(),
            max_frequency: None,
            peak_threshold: 0.01,
            autocorrelation: false,
            profiles: false,
            quadrature_order: 96,
            n_phi: None,
            root_tol: 1e-10,
            norm_tolerance: 1e-3,
            norm_floor: 0.99,
            sideband_cutoff: None,
            x_min: 0.05,
            x_max: 50.0,
            samples: 200,
            out: PathBuf::from("out"),
        }
    }
}

/// Every accepted key, in the order they are documented.
pub const KEYS: &[&str] = &[
    "mode",
    "rho",
    "soi",
    "a",
    "b",
    "nu",
    "m_min",
    "m_max",
    "eps_max",
    "k_max",
    "basis",
    "state",
    "modes",
    "amplitudes",
    "r_c",
    "phi_c",
    "sigma_r",
    "sigma_phi",
    "spin_up",
    "spin_down",
    "dt",
    "tau_end",
    "snapshots",
    "probe_r",
    "probe_phi",
    "observable",
    "average_window",
    "harmonics",
    "window",
    "max_frequency",
    "peak_threshold",
    "autocorrelation",
    "profiles",
    "quadrature_order",
    "n_phi",
    "root_tol",
    "norm_tolerance",
    "norm_floor",
    "sideband_cutoff",
    "x_min",
    "x_max",
    "samples",
    "out",
];

fn static_key(key: &str) -> Option<&'static str> {
    KEYS.iter().copied().find(|k| *k == key)
}

fn num(name: &'static str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::param(name, format!("expected a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(Error::param(name, "must be finite"));
    }
    Ok(x)
}

fn int<T: std::str::FromStr>(name: &'static str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::param(name, format!("expected an integer, got `{v}`")))
}

fn flag(name: &'static str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::param(name, format!("expected true or false, got `{v}`"))),
    }
}

fn optional(v: &str) -> Option<&str> {
    (!matches!(v, "" | "none")).then_some(v)
}

/// Whitespace-separated list; `;` also separates and `none` is empty.
fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(|c: char| c.is_whitespace() || c == ';')
        .filter(|s| !s.is_empty() && *s != "none")
}

impl RunConfig {
    /// Defaults followed by the assignments in `text`.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parameter {
                name: "config",
                reason: format!("line {}: expected `key = value`, got `{line}`", lineno + 1),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Assigns one key; `none` clears optional values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let name = static_key(key).ok_or_else(|| Error::Parameter {
            name: "config",
            reason: format!("unknown key `{key}`"),
        })?;
        let v = value;
        match name {
            "mode" => self.mode = RunMode::parse(v)?,
            "rho" => self.rho = num(name, v)?,
            "soi" => self.soi = optional(v).map(|v| num(name, v)).transpose()?,
            "a" => self.a = num(name, v)?,
            "b" => self.b = num(name, v)?,
            "nu" => self.nu = optional(v).map(|v| num(name, v)).transpose()?,
            "m_min" => self.m_min = int(name, v)?,
            "m_max" => self.m_max = int(name, v)?,
            "eps_max" => self.eps_max = optional(v).map(|v| num(name, v)).transpose()?,
            "k_max" => self.k_max = optional(v).map(|v| num(name, v)).transpose()?,
            "basis" => {
                self.basis = match v {
                    "static" => BasisChoice::Static,
                    "floquet" => BasisChoice::Floquet,
                    _ => return Err(Error::param(name, format!("expected static or floquet, got `{v}`"))),
                }
            }
            "state" => {
                self.state = match v {
                    "modes" => StateChoice::Modes,
                    "gaussian" => StateChoice::Gaussian,
                    _ => return Err(Error::param(name, format!("expected modes or gaussian, got `{v}`"))),
                }
            }
            "modes" => self.modes = list(v).map(str::to_owned).collect(),
            "amplitudes" => self.amplitudes = list(v).map(|x| num(name, x)).collect::<Result<_>>()?,
            "r_c" => self.r_c = num(name, v)?,
            "phi_c" => self.phi_c = num(name, v)?,
            "sigma_r" => self.sigma_r = num(name, v)?,
            "sigma_phi" => self.sigma_phi = num(name, v)?,
            "spin_up" => self.spin_up = num(name, v)?,
            "spin_down" => self.spin_down = num(name, v)?,
            "dt" => self.dt = num(name, v)?,
            "tau_end" => self.tau_end = num(name, v)?,
            "snapshots" => self.snapshots = list(v).map(|x| num(name, x)).collect::<Result<_>>()?,
            "probe_r" => self.probe_r = num(name, v)?,
            "probe_phi" => self.probe_phi = num(name, v)?,
            "observable" => self.observable = v.to_owned(),
            "average_window" => self.average_window = optional(v).map(|v| num(name, v)).transpose()?,
            "harmonics" => self.harmonics = int(name, v)?,
            "window" => self.window = v.to_owned(),
            "max_frequency" => self.max_frequency = optional(v).map(|v| num(name, v)).transpose()?,
            "peak_threshold" => self.peak_threshold = num(name, v)?,
            "autocorrelation" => self.autocorrelation = flag(name, v)?,
            "profiles" => self.profiles = flag(name, v)?,
            "quadrature_order" => self.quadrature_order = int(name, v)?,
            "n_phi" => self.n_phi = optional(v).map(|v| int(name, v)).transpose()?,
            "root_tol" => self.root_tol = num(name, v)?,
            "norm_tolerance" => self.norm_tolerance = num(name, v)?,
            "norm_floor" => self.norm_floor = num(name, v)?,
            "sideband_cutoff" => self.sideband_cutoff = optional(v).map(|v| int(name, v)).transpose()?,
            "x_min" => self.x_min = num(name, v)?,
            "x_max" => self.x_max = num(name, v)?,
            "samples" => self.samples = int(name, v)?,
            "out" => self.out = PathBuf::from(v),
            _ => unreachable!("key table and match arms disagree"),
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<RingGeometry> {
        RingGeometry::new(self.rho)
    }

    /// Parsed initial-state labels.
    pub fn mode_labels(&self) -> Result<Vec<ModeLabel>> {
        self.modes.iter().map(|s| ModeLabel::parse(s)).collect()
    }

    /// Drive parameters; `nu` must be present.
    pub fn require_nu(&self) -> Result<f64> {
        self.nu
            .ok_or_else(|| Error::param("nu", format!("required when mode = {} uses a driven basis", self.mode)))
    }

    fn require(&self, name: &'static str, v: Option<f64>) -> Result<f64> {
        v.ok_or_else(|| Error::param(name, format!("required for mode = {}", self.mode)))
    }

    /// Checks every invariant relevant to `self.mode` before any computation.
    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        let positive = |name: &'static str, x: f64| {
            if x > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {x}")))
            }
        };
        positive("root_tol", self.root_tol)?;
        positive("norm_tolerance", self.norm_tolerance)?;
        if !(0.0..=1.0).contains(&self.norm_floor) {
            return Err(Error::param("norm_floor", "must lie in [0, 1]"));
        }
        if self.m_min > self.m_max {
            return Err(Error::param(
                "m_min",
                format!("sector range {}..{} is empty", self.m_min, self.m_max),
            ));
        }
        if self.quadrature_order < 4 {
            return Err(Error::param("quadrature_order", "must be at least 4"));
        }
        match self.mode {
            RunMode::Static => self.validate_static()?,
            RunMode::Floquet => self.validate_floquet()?,
            RunMode::BesselDebug => {
                positive("x_min", self.x_min)?;
                if self.x_max <= self.x_min {
                    return Err(Error::param("x_max", "must exceed x_min"));
                }
                if self.samples < 2 {
                    return Err(Error::param("samples", "need at least two samples"));
                }
            }
            RunMode::Evolve | RunMode::Fourier | RunMode::Revival => self.validate_dynamic()?,
        }
        Ok(())
    }

    fn validate_static(&self) -> Result<()> {
        let soi = self.require("soi", self.soi)?;
        if soi < 0.0 {
            return Err(Error::param("soi", "must be non-negative"));
        }
        let e = self.require("eps_max", self.eps_max)?;
        if e <= 0.0 {
            return Err(Error::param("eps_max", "must be positive"));
        }
        Ok(())
    }

    fn validate_floquet(&self) -> Result<()> {
        let nu = self.require_nu()?;
        crate::floquet::Drive::new(self.a, self.b, nu)?;
        let k = self.require("k_max", self.k_max)?;
        if k <= 0.0 {
            return Err(Error::param("k_max", "must be positive"));
        }
        Ok(())
    }

    fn validate_dynamic(&self) -> Result<()> {
        match self.basis {
            BasisChoice::Static => self.validate_static()?,
            BasisChoice::Floquet => self.validate_floquet()?,
        }
        if self.dt <= 0.0 {
            return Err(Error::param("dt", "must be positive"));
        }
        if self.tau_end < self.dt {
            return Err(Error::param("tau_end", "must be at least one time step"));
        }
        if self.snapshots.iter().any(|t| *t < 0.0) {
            return Err(Error::param("snapshots", "times must be non-negative"));
        }
        let geom = self.geometry()?;
        if !geom.contains(self.probe_r) {
            return Err(Error::param("probe_r", format!("{} lies outside the ring", self.probe_r)));
        }
        crate::dynamics::Observable::parse(&self.observable)?;
        match self.window.as_str() {
            "rect" | "hann" => {}
            other => return Err(Error::param("window", format!("expected rect or hann, got `{other}`"))),
        }
        if let Some(w) = self.average_window {
            if w <= 0.0 {
                return Err(Error::param("average_window", "must be positive"));
            }
        }
        match self.state {
            StateChoice::Modes => {
                let labels = self.mode_labels()?;
                if labels.is_empty() {
                    return Err(Error::param("modes", "state = modes needs at least one label"));
                }
                if !self.amplitudes.is_empty() && self.amplitudes.len() != labels.len() {
                    return Err(Error::param("amplitudes", "one amplitude per mode label"));
                }
                if !self.amplitudes.is_empty() && self.amplitudes.iter().all(|x| *x == 0.0) {
                    return Err(Error::param("amplitudes", "initial state has zero norm"));
                }
                for l in &labels {
                    if l.sector.m < self.m_min || l.sector.m > self.m_max {
                        return Err(Error::param("modes", format!("{l} lies outside m_min..m_max")));
                    }
                }
            }
            StateChoice::Gaussian => {
                positive_or("sigma_r", self.sigma_r)?;
                positive_or("sigma_phi", self.sigma_phi)?;
                if !geom.contains(self.r_c) {
                    return Err(Error::param("r_c", "packet centre lies outside the ring"));
                }
                if self.spin_up == 0.0 && self.spin_down == 0.0 {
                    return Err(Error::param("spin_up", "spinor has zero norm"));
                }
            }
        }
        Ok(())
    }
}

fn positive_or(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {x}")))
    }
}
