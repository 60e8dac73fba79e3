//! Line-oriented `key = value` scenario files.
//!
//! Keys are dotted (`dither.omega = 5`), `#` starts a comment, blank lines are
//! ignored. Unset keys fall back to the benchmark scenario for the mode.

use std::fmt;
use std::str::FromStr;

use ues_core::delay_es::{self, DelayLoopParams, InitialConditions};
use ues_core::diffusion_es::{self, DiffusionLoopParams};
use ues_core::maps::QuadraticMap;
use ues_core::oracle::{AveragedParams, SeriesTruncation};
use ues_core::signals::DitherParams;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Delay,
    Diffusion,
    AveragedDelay,
    AveragedDiffusion,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Delay => "delay",
            Mode::Diffusion => "diffusion",
            Mode::AveragedDelay => "averaged-delay",
            Mode::AveragedDiffusion => "averaged-diffusion",
        }
    }

    fn is_diffusion(self) -> bool {
        matches!(self, Mode::Diffusion | Mode::AveragedDiffusion)
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "delay" => Ok(Mode::Delay),
            "diffusion" => Ok(Mode::Diffusion),
            "averaged-delay" => Ok(Mode::AveragedDelay),
            "averaged-diffusion" => Ok(Mode::AveragedDiffusion),
            other => Err(format!(
                "unknown mode `{other}` (expected delay, diffusion, averaged-delay or averaged-diffusion)"
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fully specified scenario. `dt`, `domain` and the output paths are
/// optional; their defaults depend on the mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub y_star: f64,
    pub theta_star: f64,
    pub hessian: f64,
    pub a: f64,
    pub omega: f64,
    pub lambda: f64,
    pub domain: Option<f64>,
    pub k: f64,
    pub omega_h: f64,
    pub dt: Option<f64>,
    pub n_cells: usize,
    pub horizon: f64,
    pub sample_stride: usize,
    pub n_modes: usize,
    pub init_estimate: f64,
    pub init_eta: f64,
    pub oracle_theta0: f64,
    pub csv_path: Option<String>,
    pub summary_path: Option<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Delay,
            y_star: 1.0,
            theta_star: 2.0,
            hessian: 2.0,
            a: 0.8,
            omega: 5.0,
            lambda: 0.04,
            domain: None,
            k: 0.03,
            omega_h: 1.0,
            dt: None,
            n_cells: 100,
            horizon: 300.0,
            sample_stride: 5,
            n_modes: 50,
            init_estimate: 0.0,
            init_eta: 0.0,
            oracle_theta0: 1.0,
            csv_path: None,
            summary_path: None,
        }
    }
}

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "mode",
    "map.y_star",
    "map.theta_star",
    "map.hessian",
    "dither.a",
    "dither.omega",
    "dither.lambda",
    "dither.D",
    "loop.k",
    "loop.omega_h",
    "numerics.dt",
    "numerics.N",
    "numerics.horizon",
    "numerics.sample_stride",
    "numerics.n_modes",
    "init.estimate",
    "init.eta",
    "oracle.theta0",
    "output.csv_path",
    "output.summary_path",
];

fn real(key: &str, value: &str) -> Result<f64, String> {
    let v: f64 = value.parse().map_err(|_| format!("`{key}` expects a number, got `{value}`"))?;
    if !v.is_finite() {
        return Err(format!("`{key}` must be finite, got `{value}`"));
    }
    Ok(v)
}

fn count(key: &str, value: &str) -> Result<usize, String> {
    value.parse().map_err(|_| format!("`{key}` expects a non-negative integer, got `{value}`"))
}

impl ScenarioConfig {
    /// Parses a scenario file on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut config = Self::default();
        let mut seen: Vec<(String, usize)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::parse(line_no, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            if let Some((_, first)) = seen.iter().find(|(k, _)| k == key) {
                return Err(CliError::parse(line_no, format!("duplicate key `{key}` (first set on line {first})")));
            }
            config.set(key, value.trim()).map_err(|msg| CliError::parse(line_no, msg))?;
            seen.push((key.to_string(), line_no));
        }
        config.check().map_err(CliError::Config)?;
        Ok(config)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{assignment}`")))?;
        self.set(key.trim(), value.trim()).map_err(|msg| CliError::Usage(format!("--set {assignment}: {msg}")))?;
        self.check().map_err(CliError::Config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        if value.is_empty() {
            return Err(format!("`{key}` has no value"));
        }
        match key {
            "mode" => self.mode = value.parse()?,
            "map.y_star" => self.y_star = real(key, value)?,
            "map.theta_star" => self.theta_star = real(key, value)?,
            "map.hessian" => self.hessian = real(key, value)?,
            "dither.a" => self.a = real(key, value)?,
            "dither.omega" => self.omega = real(key, value)?,
            "dither.lambda" => self.lambda = real(key, value)?,
            "dither.D" | "dither.d" => self.domain = Some(real(key, value)?),
            "loop.k" => self.k = real(key, value)?,
            "loop.omega_h" => self.omega_h = real(key, value)?,
            "numerics.dt" => self.dt = Some(real(key, value)?),
            "numerics.N" => self.n_cells = count(key, value)?,
            "numerics.horizon" => self.horizon = real(key, value)?,
            "numerics.sample_stride" => self.sample_stride = count(key, value)?,
            "numerics.n_modes" => self.n_modes = count(key, value)?,
            "init.estimate" => self.init_estimate = real(key, value)?,
            "init.eta" => self.init_eta = real(key, value)?,
            "oracle.theta0" => self.oracle_theta0 = real(key, value)?,
            "output.csv_path" => self.csv_path = Some(value.to_string()),
            "output.summary_path" => self.summary_path = Some(value.to_string()),
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Structural checks shared by every subcommand.
    pub fn check(&self) -> Result<(), String> {
        if self.sample_stride == 0 {
            return Err("numerics.sample_stride must be at least 1".into());
        }
        if self.horizon < 0.0 {
            return Err("numerics.horizon must be non-negative".into());
        }
        if matches!(self.dt, Some(dt) if dt <= 0.0) {
            return Err("numerics.dt must be positive".into());
        }
        self.dither().validate().map_err(|e| e.to_string())?;
        self.map().validate().map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn domain(&self) -> f64 {
        self.domain.unwrap_or(if self.mode.is_diffusion() { 1.0 } else { 5.0 })
    }

    pub fn dither(&self) -> DitherParams {
        DitherParams { a: self.a, omega: self.omega, lambda: self.lambda, d: self.domain() }
    }

    pub fn map(&self) -> QuadraticMap {
        QuadraticMap { y_star: self.y_star, theta_star: self.theta_star, hessian: self.hessian }
    }

    pub fn dt(&self) -> f64 {
        let dither = self.dither();
        self.dt.unwrap_or_else(|| match self.mode {
            Mode::Delay => delay_es::default_dt(&dither),
            Mode::Diffusion => diffusion_es::default_dt(&dither),
            Mode::AveragedDelay | Mode::AveragedDiffusion => 0.01,
        })
    }

    fn initial(&self) -> InitialConditions {
        InitialConditions { estimate: self.init_estimate, eta: self.init_eta }
    }

    pub fn delay_params(&self) -> DelayLoopParams {
        DelayLoopParams {
            k: self.k,
            dither: self.dither(),
            omega_h: self.omega_h,
            map: self.map(),
            dt: self.dt(),
            horizon: self.horizon,
            sample_stride: self.sample_stride,
            initial: self.initial(),
        }
    }

    pub fn diffusion_params(&self) -> DiffusionLoopParams {
        DiffusionLoopParams {
            k: self.k,
            dither: self.dither(),
            omega_h: self.omega_h,
            map: self.map(),
            dt: self.dt(),
            horizon: self.horizon,
            n_cells: self.n_cells,
            sample_stride: self.sample_stride,
            initial: self.initial(),
        }
    }

    pub fn averaged_params(&self) -> AveragedParams {
        AveragedParams {
            k: self.k,
            hessian: self.hessian,
            lambda: self.lambda,
            omega_h: self.omega_h,
            a: self.a,
            d: self.domain(),
        }
    }

    pub fn truncation(&self) -> Result<SeriesTruncation, CliError> {
        SeriesTruncation::new(self.n_modes).map_err(|e| CliError::Config(e.to_string()))
    }

    fn value_of(&self, key: &str) -> Option<String> {
        let r = |v: f64| Some(format!("{v:?}"));
        match key {
            "mode" => Some(self.mode.to_string()),
            "map.y_star" => r(self.y_star),
            "map.theta_star" => r(self.theta_star),
            "map.hessian" => r(self.hessian),
            "dither.a" => r(self.a),
            "dither.omega" => r(self.omega),
            "dither.lambda" => r(self.lambda),
            "dither.D" => self.domain.and_then(r),
            "loop.k" => r(self.k),
            "loop.omega_h" => r(self.omega_h),
            "numerics.dt" => self.dt.and_then(r),
            "numerics.N" => Some(self.n_cells.to_string()),
            "numerics.horizon" => r(self.horizon),
            "numerics.sample_stride" => Some(self.sample_stride.to_string()),
            "numerics.n_modes" => Some(self.n_modes.to_string()),
            "init.estimate" => r(self.init_estimate),
            "init.eta" => r(self.init_eta),
            "oracle.theta0" => r(self.oracle_theta0),
            "output.csv_path" => self.csv_path.clone(),
            "output.summary_path" => self.summary_path.clone(),
            _ => None,
        }
    }

    /// Config file text that parses back to `self`. Unset optional keys are omitted.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .filter_map(|key| self.value_of(key).map(|v| format!("{key} = {v}\n")))
            .collect()
    }
}
