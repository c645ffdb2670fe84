//! `key = value` run configuration with a round-tripping resolved echo.

use std::fmt::Write as _;
use std::path::PathBuf;

use plasmon_core::dynamics::VolterraScheme;
use plasmon_core::materials::MaterialSystem;
use plasmon_core::pseudomode::Convention;
use plasmon_core::quadrature::QuadConfig;
use plasmon_core::spectral::{SpectralModel, SpectralOptions, TableSettings};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{origin}: {key}: {message}")]
pub struct ConfigError {
    /// Where the offending text came from, e.g. `line 4` or `--set #2`.
    pub origin: String,
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(origin: &str, key: &str, message: impl Into<String>) -> Self {
        Self {
            origin: origin.to_string(),
            key: key.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: MaterialSystem<f64>,
    pub omega_min_ev: f64,
    pub omega_max_ev: f64,
    pub base_points: usize,
    pub spectral_model: SpectralModel,
    pub include_free_term: bool,
    pub quad_rel_tol: f64,
    pub quad_abs_tol: f64,
    pub quad_max_subdivisions: usize,
    pub t_max_inv_ev: f64,
    pub dt_inv_ev: f64,
    pub scheme: VolterraScheme,
    pub convention: Convention,
    pub delta_z_grid_nm: Vec<f64>,
    pub eps_d_grid: Vec<f64>,
    pub opt_delta_z_min_nm: f64,
    pub opt_delta_z_max_nm: f64,
    pub opt_grid_points: usize,
    pub opt_tolerance_nm: f64,
    pub confirm_runs: bool,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: MaterialSystem::silver_germanium_default(),
            omega_min_ev: 0.02,
            omega_max_ev: 6.0,
            base_points: 600,
            spectral_model: SpectralModel::Exact,
            include_free_term: true,
            quad_rel_tol: 1e-9,
            quad_abs_tol: 1e-12,
            quad_max_subdivisions: 2000,
            t_max_inv_ev: 2000.0,
            dt_inv_ev: 0.005,
            scheme: VolterraScheme::Gregory4,
            convention: Convention::KernelMatched,
            delta_z_grid_nm: vec![0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0],
            eps_d_grid: vec![5.0, 10.0, 25.0],
            opt_delta_z_min_nm: 0.5,
            opt_delta_z_max_nm: 5.0,
            opt_grid_points: 12,
            opt_tolerance_nm: 1e-3,
            confirm_runs: true,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "omega_p_ev",
    "eps_inf",
    "gamma_p_ev",
    "eps_d",
    "omega0_ev",
    "gamma0_ev",
    "delta_z_nm",
    "omega_min_ev",
    "omega_max_ev",
    "base_points",
    "spectral_model",
    "include_free_term",
    "quad_rel_tol",
    "quad_abs_tol",
    "quad_max_subdivisions",
    "t_max_inv_ev",
    "dt_inv_ev",
    "scheme",
    "convention",
    "delta_z_grid_nm",
    "eps_d_grid",
    "opt_delta_z_min_nm",
    "opt_delta_z_max_nm",
    "opt_grid_points",
    "opt_tolerance_nm",
    "confirm_runs",
    "out_dir",
];

fn parse_f64(v: &str) -> Result<f64, String> {
    let x: f64 = v
        .parse()
        .map_err(|_| format!("expected a number, got '{v}'"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a finite number, got '{v}'"))
    }
}

fn parse_usize(v: &str) -> Result<usize, String> {
    v.parse()
        .map_err(|_| format!("expected a non-negative integer, got '{v}'"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    let out: Result<Vec<f64>, String> = v.split(',').map(|s| parse_f64(s.trim())).collect();
    let out = out?;
    if out.is_empty() {
        return Err("list must not be empty".into());
    }
    Ok(out)
}

fn positive(x: f64) -> Result<f64, String> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be > 0, got {x}"))
    }
}

fn model_name(m: SpectralModel) -> &'static str {
    match m {
        SpectralModel::Exact => "exact",
        SpectralModel::Quasistatic => "quasistatic",
        SpectralModel::Lorentzian => "lorentzian",
    }
}

fn scheme_name(s: VolterraScheme) -> &'static str {
    match s {
        VolterraScheme::Gregory4 => "gregory4",
        VolterraScheme::Trapezoid => "trapezoid",
    }
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// Sets one key from its textual value, checking single-field invariants.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let s = &mut self.system;
        match key {
            "omega_p_ev" => s.metal.omega_p = positive(parse_f64(value)?)?,
            "eps_inf" => {
                let x = parse_f64(value)?;
                if x < 1.0 {
                    return Err(format!("must be >= 1, got {x}"));
                }
                s.metal.eps_inf = x;
            }
            "gamma_p_ev" => s.metal.gamma_p = positive(parse_f64(value)?)?,
            "eps_d" => {
                let x = parse_f64(value)?;
                if x < 1.0 {
                    return Err(format!("must be >= 1, got {x}"));
                }
                s.dielectric.eps_d = x;
            }
            "omega0_ev" => s.emitter.omega0 = positive(parse_f64(value)?)?,
            "gamma0_ev" => s.emitter.gamma0 = positive(parse_f64(value)?)?,
            "delta_z_nm" => s.emitter.delta_z = positive(parse_f64(value)?)?,
            "omega_min_ev" => self.omega_min_ev = positive(parse_f64(value)?)?,
            "omega_max_ev" => self.omega_max_ev = positive(parse_f64(value)?)?,
            "base_points" => {
                let n = parse_usize(value)?;
                if n < 2 {
                    return Err(format!("must be >= 2, got {n}"));
                }
                self.base_points = n;
            }
            "spectral_model" => {
                self.spectral_model = match value {
                    "exact" => SpectralModel::Exact,
                    "quasistatic" => SpectralModel::Quasistatic,
                    "lorentzian" => SpectralModel::Lorentzian,
                    _ => {
                        return Err(format!(
                            "expected exact, quasistatic or lorentzian, got '{value}'"
                        ))
                    }
                }
            }
            "include_free_term" => self.include_free_term = parse_bool(value)?,
            "quad_rel_tol" => self.quad_rel_tol = positive(parse_f64(value)?)?,
            "quad_abs_tol" => self.quad_abs_tol = positive(parse_f64(value)?)?,
            "quad_max_subdivisions" => {
                let n = parse_usize(value)?;
                if n == 0 {
                    return Err("must be >= 1".into());
                }
                self.quad_max_subdivisions = n;
            }
            "t_max_inv_ev" => self.t_max_inv_ev = positive(parse_f64(value)?)?,
            "dt_inv_ev" => self.dt_inv_ev = positive(parse_f64(value)?)?,
            "scheme" => {
                self.scheme = match value {
                    "gregory4" => VolterraScheme::Gregory4,
                    "trapezoid" => VolterraScheme::Trapezoid,
                    _ => return Err(format!("expected gregory4 or trapezoid, got '{value}'")),
                }
            }
            "convention" => self.convention = value.parse()?,
            "delta_z_grid_nm" => {
                let v = parse_list(value)?;
                for x in &v {
                    positive(*x)?;
                }
                self.delta_z_grid_nm = v;
            }
            "eps_d_grid" => {
                let v = parse_list(value)?;
                if let Some(x) = v.iter().find(|x| **x < 1.0) {
                    return Err(format!("values must be >= 1, got {x}"));
                }
                self.eps_d_grid = v;
            }
            "opt_delta_z_min_nm" => self.opt_delta_z_min_nm = positive(parse_f64(value)?)?,
            "opt_delta_z_max_nm" => self.opt_delta_z_max_nm = positive(parse_f64(value)?)?,
            "opt_grid_points" => {
                let n = parse_usize(value)?;
                if n < 3 {
                    return Err(format!("must be >= 3, got {n}"));
                }
                self.opt_grid_points = n;
            }
            "opt_tolerance_nm" => self.opt_tolerance_nm = positive(parse_f64(value)?)?,
            "confirm_runs" => self.confirm_runs = parse_bool(value)?,
            "out_dir" => {
                if value.is_empty() {
                    return Err("must not be empty".into());
                }
                self.out_dir = PathBuf::from(value);
            }
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Checks invariants that involve more than one key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |key: &str, msg: String| Err(ConfigError::new("resolved config", key, msg));
        if self.omega_max_ev <= self.omega_min_ev {
            return err(
                "omega_max_ev",
                format!("must exceed omega_min_ev = {}", self.omega_min_ev),
            );
        }
        let w0 = self.system.emitter.omega0;
        if w0 <= self.omega_min_ev || w0 >= self.omega_max_ev {
            return err(
                "omega0_ev",
                format!(
                    "must lie inside ({}, {})",
                    self.omega_min_ev, self.omega_max_ev
                ),
            );
        }
        if self.dt_inv_ev > self.t_max_inv_ev {
            return err(
                "dt_inv_ev",
                format!("must not exceed t_max_inv_ev = {}", self.t_max_inv_ev),
            );
        }
        if self.opt_delta_z_max_nm <= self.opt_delta_z_min_nm {
            return err(
                "opt_delta_z_max_nm",
                format!(
                    "must exceed opt_delta_z_min_nm = {}",
                    self.opt_delta_z_min_nm
                ),
            );
        }
        Ok(())
    }

    /// Applies `key = value` lines. `origin` labels error positions.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = format!("{origin} line {}", i + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new(&at, line, "expected 'key = value'"))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::new(&at, key, "unknown key"));
            }
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::new(&at, key, "duplicate key"));
            }
            seen.push(key.to_string());
            self.set(key, value)
                .map_err(|m| ConfigError::new(&at, key, m))?;
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, item: &str, index: usize) -> Result<(), ConfigError> {
        let at = format!("--set #{}", index + 1);
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| ConfigError::new(&at, item, "expected key=value"))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(ConfigError::new(&at, key, "unknown key"));
        }
        self.set(key, value)
            .map_err(|m| ConfigError::new(&at, key, m))
    }

    pub fn value_of(&self, key: &str) -> String {
        let s = &self.system;
        match key {
            "omega_p_ev" => s.metal.omega_p.to_string(),
            "eps_inf" => s.metal.eps_inf.to_string(),
            "gamma_p_ev" => s.metal.gamma_p.to_string(),
            "eps_d" => s.dielectric.eps_d.to_string(),
            "omega0_ev" => s.emitter.omega0.to_string(),
            "gamma0_ev" => s.emitter.gamma0.to_string(),
            "delta_z_nm" => s.emitter.delta_z.to_string(),
            "omega_min_ev" => self.omega_min_ev.to_string(),
            "omega_max_ev" => self.omega_max_ev.to_string(),
            "base_points" => self.base_points.to_string(),
            "spectral_model" => model_name(self.spectral_model).to_string(),
            "include_free_term" => self.include_free_term.to_string(),
            "quad_rel_tol" => self.quad_rel_tol.to_string(),
            "quad_abs_tol" => self.quad_abs_tol.to_string(),
            "quad_max_subdivisions" => self.quad_max_subdivisions.to_string(),
            "t_max_inv_ev" => self.t_max_inv_ev.to_string(),
            "dt_inv_ev" => self.dt_inv_ev.to_string(),
            "scheme" => scheme_name(self.scheme).to_string(),
            "convention" => self.convention.to_string(),
            "delta_z_grid_nm" => join(&self.delta_z_grid_nm),
            "eps_d_grid" => join(&self.eps_d_grid),
            "opt_delta_z_min_nm" => self.opt_delta_z_min_nm.to_string(),
            "opt_delta_z_max_nm" => self.opt_delta_z_max_nm.to_string(),
            "opt_grid_points" => self.opt_grid_points.to_string(),
            "opt_tolerance_nm" => self.opt_tolerance_nm.to_string(),
            "confirm_runs" => self.confirm_runs.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// Fully resolved configuration in the input format.
    pub fn echo(&self) -> String {
        let mut out = String::from("# resolved configuration\n");
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.value_of(key));
        }
        out
    }

    pub fn table_settings(&self) -> TableSettings<f64> {
        TableSettings {
            omega_min: self.omega_min_ev,
            omega_max: self.omega_max_ev,
            base_points: self.base_points,
            model: self.spectral_model,
            options: SpectralOptions {
                include_free_term: self.include_free_term,
                include_reflection: true,
                quad: QuadConfig {
                    rel_tol: self.quad_rel_tol,
                    abs_tol: self.quad_abs_tol,
                    max_subdivisions: self.quad_max_subdivisions,
                },
            },
        }
    }
}

/// Defaults overlaid with `text`, then cross-field validation.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    cfg.apply_text(text, "config")?;
    cfg.validate()?;
    Ok(cfg)
}
