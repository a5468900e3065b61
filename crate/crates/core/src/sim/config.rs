use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::solvers::{Damping, ForcingSequence, NewtonConfig, Variant};
use crate::structure::{RibbonParams, SpringLaw, Supports};
use crate::uvlm::UvlmConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Validation(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    #[serde(rename = "L")]
    pub length: f64,
    pub c: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    #[serde(rename = "E")]
    pub youngs_modulus: f64,
    #[serde(rename = "G")]
    pub shear_modulus: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flow {
    pub v_inf: f64,
    pub alpha_deg: f64,
    pub rho_f: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mesh {
    pub m_s: usize,
    pub m_a: usize,
    pub n_a: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Time {
    #[serde(default)]
    pub dt: Option<f64>,
    /// Characteristic length; `dt = delta_l / v_inf` when `dt` is absent.
    #[serde(default)]
    pub delta_l: Option<f64>,
    pub t_final: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Uvlm {
    pub cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub gamma_ref: f64,
    #[serde(default = "default_fd_eps")]
    pub fd_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solver {
    #[serde(default = "default_variant")]
    pub variant: String,
    pub tol: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_damping")]
    pub damping: String,
    #[serde(default = "default_armijo_c")]
    pub armijo_c: f64,
    #[serde(default = "default_max_refinements")]
    pub max_refinements: usize,
    #[serde(default = "default_forcing")]
    pub forcing: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Structure {
    #[serde(default = "default_law")]
    pub law: String,
    #[serde(default = "default_supports")]
    pub supports: String,
    #[serde(default)]
    pub gravity: [f64; 3],
}

impl Default for Structure {
    fn default() -> Self {
        Self {
            law: default_law(),
            supports: default_supports(),
            gravity: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Write `wake_<step>.csv` node dumps.
    #[serde(default)]
    pub wake_dump: bool,
    /// Write `contraction.csv` with a per-step estimate of the refinement contraction factor.
    #[serde(default)]
    pub contraction: bool,
}

fn default_fd_eps() -> f64 {
    1e-6
}
fn default_variant() -> String {
    "exact".into()
}
fn default_max_steps() -> usize {
    50
}
fn default_damping() -> String {
    "full_step".into()
}
fn default_armijo_c() -> f64 {
    1e-4
}
fn default_max_refinements() -> usize {
    50
}
fn default_forcing() -> String {
    "variant1".into()
}
fn default_law() -> String {
    "geometric".into()
}
fn default_supports() -> String {
    "hinged".into()
}

/// Complete scenario description.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub geometry: Geometry,
    pub material: Material,
    pub flow: Flow,
    pub mesh: Mesh,
    pub time: Time,
    pub uvlm: Uvlm,
    pub coupling: Coupling,
    pub solver: Solver,
    #[serde(default)]
    pub structure: Structure,
    #[serde(default)]
    pub output: Output,
    #[serde(default)]
    pub seed: u64,
}

pub const PLATE_TOML: &str = r#"
seed = 0

[geometry]
L = 10.0
c = 1.0
t = 0.008

[material]
E = 7.0e10
G = 2.63e10
rho = 2700.0

[flow]
v_inf = 45.0
alpha_deg = 15.0
rho_f = 1.225

[mesh]
m_s = 50
m_a = 50
n_a = 4

[time]
delta_l = 0.25
t_final = 3.0

[uvlm]
cutoff = 0.01

[coupling]
gamma_ref = 0.501

[solver]
variant = "exact"
tol = 1e-8
"#;

pub fn load_config(source: &str) -> Result<SimConfig, ConfigError> {
    let cfg: SimConfig = toml::from_str(source).map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| source[..s.start.min(source.len())].matches('\n').count() + 1),
        message: e.message().to_string(),
    })?;
    if cfg.time.dt.is_none() && cfg.time.delta_l.is_none() {
        return Err(ConfigError::Parse {
            line: None,
            message: "time step underdetermined: give time.dt or time.delta_l".into(),
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config_file(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_config(&text)
}

pub fn parse_variant(s: &str) -> Result<Variant, ConfigError> {
    match s {
        "exact" => Ok(Variant::Exact),
        "quasi" => Ok(Variant::Quasi),
        "inexact" => Ok(Variant::Inexact),
        _ => invalid(format!("unknown solver variant '{s}' (exact|quasi|inexact)")),
    }
}

/// `variant1`, `variant2`, `const:<eta>` or `scale:<s>`.
pub fn parse_forcing(s: &str) -> Result<ForcingSequence, ConfigError> {
    let num = |v: &str| {
        v.parse::<f64>()
            .map_err(|_| ConfigError::Validation(format!("bad number '{v}' in forcing '{s}'")))
    };
    let f = match s {
        "variant1" => ForcingSequence::variant1(),
        "variant2" => ForcingSequence::variant2(),
        _ => {
            if let Some(v) = s.strip_prefix("const:") {
                ForcingSequence::constant(num(v)?)
            } else if let Some(v) = s.strip_prefix("scale:") {
                ForcingSequence::custom_scale(num(v)?)
            } else {
                return invalid(format!("unknown forcing '{s}' (variant1|variant2|const:<v>|scale:<v>)"));
            }
        }
    };
    f.validate().map_err(|e| ConfigError::Validation(e.to_string()))?;
    Ok(f)
}

impl SimConfig {
    /// Aluminium plate strip at 15° in a 45 m/s stream, 540 steps.
    pub fn plate() -> Self {
        load_config(PLATE_TOML).expect("built-in preset is valid")
    }

    /// The plate on coarse meshes over half a second.
    pub fn reduced_plate() -> Self {
        let mut cfg = Self::plate();
        cfg.mesh = Mesh { m_s: 10, m_a: 10, n_a: 2 };
        cfg.time.t_final = 0.5;
        cfg
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name {
            "plate" => Ok(Self::plate()),
            "reduced" | "reduced-plate" => Ok(Self::reduced_plate()),
            _ => invalid(format!("unknown preset '{name}' (plate|reduced)")),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("geometry.L", self.geometry.length),
            ("geometry.c", self.geometry.c),
            ("geometry.t", self.geometry.t),
            ("material.E", self.material.youngs_modulus),
            ("material.G", self.material.shear_modulus),
            ("material.rho", self.material.rho),
            ("flow.rho_f", self.flow.rho_f),
            ("time.t_final", self.time.t_final),
            ("uvlm.cutoff", self.uvlm.cutoff),
            ("coupling.gamma_ref", self.coupling.gamma_ref),
            ("coupling.fd_eps", self.coupling.fd_eps),
            ("solver.tol", self.solver.tol),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{k} must be positive, got {v}"));
            }
        }
        if !(self.flow.v_inf >= 0.0 && self.flow.v_inf.is_finite()) {
            return invalid(format!("flow.v_inf must be >= 0, got {}", self.flow.v_inf));
        }
        if !self.flow.alpha_deg.is_finite() || self.structure.gravity.iter().any(|g| !g.is_finite()) {
            return invalid("flow.alpha_deg and structure.gravity must be finite");
        }
        if self.mesh.m_s < 2 || self.mesh.m_a < 1 || self.mesh.n_a < 1 {
            return invalid("mesh needs m_s >= 2, m_a >= 1, n_a >= 1");
        }
        if let Some(dt) = self.time.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return invalid(format!("time.dt must be positive, got {dt}"));
            }
        } else {
            match self.time.delta_l {
                Some(l) if l > 0.0 && l.is_finite() => {
                    if !(self.flow.v_inf > 0.0) {
                        return invalid("time.delta_l needs flow.v_inf > 0 (or give time.dt)");
                    }
                }
                Some(l) => return invalid(format!("time.delta_l must be positive, got {l}")),
                None => return invalid("give time.dt or time.delta_l"),
            }
        }
        if self.time.t_final < self.dt() * (1.0 - 1e-12) {
            return invalid(format!("time.t_final {} is shorter than one step {}", self.time.t_final, self.dt()));
        }
        if self.solver.max_steps == 0 || self.solver.max_refinements == 0 {
            return invalid("solver.max_steps and solver.max_refinements must be >= 1");
        }
        self.newton_config()?;
        self.ribbon_params()?;
        Ok(())
    }

    /// Step size, from `time.dt` or `delta_l / v_inf`.
    pub fn dt(&self) -> f64 {
        match (self.time.dt, self.time.delta_l) {
            (Some(dt), _) => dt,
            (None, Some(l)) => l / self.flow.v_inf,
            (None, None) => f64::NAN,
        }
    }

    pub fn steps(&self) -> usize {
        (self.time.t_final / self.dt()).round() as usize
    }

    pub fn newton_config(&self) -> Result<NewtonConfig, ConfigError> {
        let damping = match self.solver.damping.as_str() {
            "full_step" => Damping::FullStep,
            "armijo" => Damping::Armijo,
            d => return invalid(format!("unknown damping '{d}' (full_step|armijo)")),
        };
        let cfg = NewtonConfig {
            tol: self.solver.tol,
            max_steps: self.solver.max_steps,
            variant: parse_variant(&self.solver.variant)?,
            damping,
            armijo_c: self.solver.armijo_c,
            max_refinements: self.solver.max_refinements,
            forcing: parse_forcing(&self.solver.forcing)?,
            record_iterates: false,
        };
        cfg.validate().map_err(|e| ConfigError::Validation(e.to_string()))?;
        Ok(cfg)
    }

    pub fn ribbon_params(&self) -> Result<RibbonParams, ConfigError> {
        let law = match self.structure.law.as_str() {
            "geometric" => SpringLaw::Geometric,
            "linear" => SpringLaw::Linear,
            l => return invalid(format!("unknown spring law '{l}' (geometric|linear)")),
        };
        let supports = match self.structure.supports.as_str() {
            "hinged" => Supports::Hinged,
            "free" => Supports::Free,
            s => return invalid(format!("unknown supports '{s}' (hinged|free)")),
        };
        Ok(RibbonParams {
            length: self.geometry.length,
            chord: self.geometry.c,
            thickness: self.geometry.t,
            youngs_modulus: self.material.youngs_modulus,
            shear_modulus: self.material.shear_modulus,
            density: self.material.rho,
            elements: self.mesh.m_s,
            law,
            supports,
        })
    }

    pub fn uvlm_config(&self) -> UvlmConfig {
        UvlmConfig {
            cutoff_delta: self.uvlm.cutoff,
            span_panels: self.mesh.m_a,
            chord_panels: self.mesh.n_a,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plate_preset_steps() {
        let cfg = SimConfig::plate();
        assert!((cfg.dt() - 5.5556e-3).abs() < 1e-7);
        assert_eq!(cfg.steps(), 540);
        assert_eq!(SimConfig::reduced_plate().steps(), 90);
        let p = cfg.ribbon_params().unwrap();
        assert_eq!(p, RibbonParams::aluminium_plate(50));
    }

    #[test]
    fn negative_dt_rejected() {
        let src = PLATE_TOML.replace("delta_l = 0.25", "dt = -0.1");
        assert!(matches!(load_config(&src), Err(ConfigError::Validation(_))));
    }

    #[test]
    fn missing_speed_is_parse_error() {
        let src = PLATE_TOML.replace("v_inf = 45.0\n", "");
        assert!(matches!(load_config(&src), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn unknown_key_reports_line() {
        let src = PLATE_TOML.replace("cutoff = 0.01", "cutoff = 0.01\nradius = 2.0");
        match load_config(&src) {
            Err(ConfigError::Parse { line: Some(l), message }) => {
                assert!(message.contains("radius"), "{message}");
                assert_eq!(src.lines().nth(l - 1).unwrap().trim(), "radius = 2.0");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn forcing_strings() {
        assert_eq!(parse_forcing("variant2").unwrap(), ForcingSequence::variant2());
        assert_eq!(parse_forcing("const:1e-12").unwrap(), ForcingSequence::constant(1e-12));
        assert!(parse_forcing("const:2").is_err());
        assert!(parse_forcing("fast").is_err());
        assert!(parse_variant("broyden").is_err());
    }

    #[test]
    fn zero_speed_needs_explicit_dt() {
        let src = PLATE_TOML.replace("v_inf = 45.0", "v_inf = 0.0");
        assert!(load_config(&src).is_err());
        let src = src.replace("delta_l = 0.25", "dt = 0.01");
        assert_eq!(load_config(&src).unwrap().steps(), 300);
    }
}
