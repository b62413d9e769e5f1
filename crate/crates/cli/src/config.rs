//! Run configuration.
//!
//! A config is a TOML document with top-level keys and one level of tables:
//!
//! ```toml
//! potential = "0.2*cos(2*pi*x)"
//! grid = 16384            # optional, default 16384
//! refine_levels = 0       # optional, geometric refinement toward 0
//! seed = 42               # optional, overridden by --seed
//! c = [0.1]               # optional c sweep for the compatibility check
//! x_min = 1e-6            # optional smallest compatibility sample point
//! cover_depth = 12        # optional depth of the cover-pressure sums
//!
//! [map]
//! family = "mp"           # or "ilog" with k = 1 and a = 1.0
//! s = 0.5
//!
//! [omega]
//! family = "ab"           # or "ilog" with terms = [[1, 2.0], [2, 2.0]], or "ilog-pair" with k
//! alpha = 0.75
//! beta = 0.0
//!
//! [omega_big]
//! family = "legendre"     # or any omega family; legendre takes tau and grid_size
//!
//! [tolerances]
//! power_tol = 1e-10
//! max_iter = 5000
//! ulam_tol = 1e-12
//!
//! [gibbs]
//! r = 0.05
//! samples = 100
//! n_max = 12
//! ```

use std::path::{Path, PathBuf};

use circle_rpf::maps::CircleMap;
use circle_rpf::moduli::{default_c, ilog_composite, ilog_eigen_omega, ilog_potential_omega, omega_ab, Modulus};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::expr::{parse_potential, Expr};

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MapSpec {
    Mp { s: f64 },
    Ilog { k: u32, #[serde(default = "one")] a: f64 },
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OmegaSpec {
    Ab { alpha: f64, #[serde(default)] beta: f64 },
    Ilog { terms: Vec<(u32, f64)> },
    IlogPair { k: u32 },
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OmegaBigSpec {
    Legendre { tau: Option<f64>, #[serde(default = "legendre_grid")] grid_size: usize },
    Ab { alpha: f64, #[serde(default)] beta: f64 },
    Ilog { terms: Vec<(u32, f64)> },
    IlogPair,
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "power_tol")]
    pub power_tol: f64,
    #[serde(default = "max_iter")]
    pub max_iter: usize,
    #[serde(default = "ulam_tol")]
    pub ulam_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { power_tol: power_tol(), max_iter: max_iter(), ulam_tol: ulam_tol() }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GibbsSpec {
    #[serde(default = "gibbs_r")]
    pub r: f64,
    #[serde(default = "gibbs_samples")]
    pub samples: usize,
    #[serde(default = "gibbs_n_max")]
    pub n_max: usize,
}

impl Default for GibbsSpec {
    fn default() -> Self {
        GibbsSpec { r: gibbs_r(), samples: gibbs_samples(), n_max: gibbs_n_max() }
    }
}

fn one() -> f64 {
    1.0
}
fn legendre_grid() -> usize {
    10_000
}
fn power_tol() -> f64 {
    1e-10
}
fn max_iter() -> usize {
    5000
}
fn ulam_tol() -> f64 {
    1e-12
}
fn gibbs_r() -> f64 {
    0.05
}
fn gibbs_samples() -> usize {
    100
}
fn gibbs_n_max() -> usize {
    12
}
fn default_grid() -> usize {
    16_384
}
fn default_cover_depth() -> usize {
    12
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub map: MapSpec,
    pub omega: OmegaSpec,
    pub omega_big: OmegaBigSpec,
    pub potential: String,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub refine_levels: u32,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub c: Option<Vec<f64>>,
    pub x_min: Option<f64>,
    #[serde(default = "default_cover_depth")]
    pub cover_depth: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub gibbs: GibbsSpec,
}

fn field(field: &str, msg: impl Into<String>) -> CliError {
    CliError::Config { field: field.into(), msg: msg.into() }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    /// Checks every parameter range before any computation starts.
    pub fn validate(&self) -> Result<(), CliError> {
        self.build_map()?;
        self.build_omega()?;
        self.potential_expr()?;
        match &self.omega_big {
            OmegaBigSpec::Legendre { tau, grid_size } => {
                if let Some(t) = tau {
                    if !(*t > 0.0) {
                        return Err(field("omega_big.tau", format!("{t} must be positive")));
                    }
                }
                if *grid_size < 1000 {
                    return Err(field("omega_big.grid_size", format!("{grid_size} must be >= 1000")));
                }
            }
            _ => {
                self.explicit_omega_big()?;
            }
        }
        if self.grid < 256 {
            return Err(field("grid", format!("{} must be >= 256", self.grid)));
        }
        if self.refine_levels > 0 {
            circle_rpf::Grid::refined(self.grid, self.refine_levels).map_err(|e| field("refine_levels", e.to_string()))?;
        }
        let map = self.build_map()?;
        let c_max = 2f64.powf(-(map.sigma() + 2.0));
        for c in self.c_values(&map) {
            if !(c > 0.0 && c <= c_max) {
                return Err(field("c", format!("{c} must lie in (0, {c_max}]")));
            }
        }
        if let Some(x) = self.x_min {
            if !(x > 0.0 && x < 1e-3) {
                return Err(field("x_min", format!("{x} must lie in (0, 1e-3)")));
            }
        }
        let t = &self.tolerances;
        if !(t.power_tol > 0.0) {
            return Err(field("tolerances.power_tol", "must be positive"));
        }
        if !(t.ulam_tol > 0.0) {
            return Err(field("tolerances.ulam_tol", "must be positive"));
        }
        if t.max_iter == 0 {
            return Err(field("tolerances.max_iter", "must be positive"));
        }
        let g = &self.gibbs;
        if !(g.r > 0.0 && g.r < 0.25) {
            return Err(field("gibbs.r", format!("{} must lie in (0, 1/4)", g.r)));
        }
        if g.samples == 0 {
            return Err(field("gibbs.samples", "must be positive"));
        }
        if self.cover_depth > 20 {
            return Err(field("cover_depth", format!("{} exceeds 20", self.cover_depth)));
        }
        Ok(())
    }

    pub fn build_map(&self) -> Result<CircleMap, CliError> {
        match &self.map {
            MapSpec::Mp { s } => CircleMap::manneville_pomeau(*s).map_err(|e| field("map.s", e.to_string())),
            MapSpec::Ilog { k, a } => CircleMap::iterated_log(*k, *a).map_err(|e| field("map", e.to_string())),
        }
    }

    pub fn build_omega(&self) -> Result<Modulus, CliError> {
        match &self.omega {
            OmegaSpec::Ab { alpha, beta } => omega_ab(*alpha, *beta).map_err(|e| field("omega", e.to_string())),
            OmegaSpec::Ilog { terms } => ilog_composite(terms).map_err(|e| field("omega.terms", e.to_string())),
            OmegaSpec::IlogPair { k } => ilog_potential_omega(*k).map_err(|e| field("omega.k", e.to_string())),
        }
    }

    /// `Ω` for the explicit families; `None` when it is Legendre-built.
    pub fn explicit_omega_big(&self) -> Result<Option<Modulus>, CliError> {
        let m = match &self.omega_big {
            OmegaBigSpec::Legendre { .. } => return Ok(None),
            OmegaBigSpec::Ab { alpha, beta } => omega_ab(*alpha, *beta),
            OmegaBigSpec::Ilog { terms } => ilog_composite(terms),
            OmegaBigSpec::IlogPair => ilog_eigen_omega(),
        };
        m.map(Some).map_err(|e| field("omega_big", e.to_string()))
    }

    pub fn potential_expr(&self) -> Result<Expr, CliError> {
        parse_potential(&self.potential).map_err(|e| field("potential", e))
    }

    pub fn c_values(&self, map: &CircleMap) -> Vec<f64> {
        self.c.clone().unwrap_or_else(|| vec![default_c(map)])
    }

    /// Smallest compatibility sample point: `1e-6` above a Legendre-built `Ω` (whose
    /// grid starts at `1e-8`), `1e-12` otherwise.
    pub fn x_min_value(&self) -> f64 {
        self.x_min.unwrap_or(match self.omega_big {
            OmegaBigSpec::Legendre { .. } => 1e-6,
            _ => 1e-12,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const POWER_MAP: &str = r#"
potential = "0.2*cos(2*pi*x)"
grid = 4096
[map]
family = "mp"
s = 0.5
[omega]
family = "ab"
alpha = 0.75
[omega_big]
family = "legendre"
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = RunConfig::parse(POWER_MAP).unwrap();
        assert_eq!(cfg.map, MapSpec::Mp { s: 0.5 });
        assert_eq!(cfg.omega, OmegaSpec::Ab { alpha: 0.75, beta: 0.0 });
        assert_eq!(cfg.omega_big, OmegaBigSpec::Legendre { tau: None, grid_size: 10_000 });
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.gibbs, GibbsSpec::default());
        assert_eq!(cfg.c_values(&cfg.build_map().unwrap()), vec![0.1]);
        assert_eq!(cfg.x_min_value(), 1e-6);
    }

    #[test]
    fn inline_tables_and_other_families() {
        let text = r#"
potential = "0.1*sin(2*pi*x)"
map = { family = "ilog", k = 1 }
omega = { family = "ilog-pair", k = 1 }
omega_big = { family = "ilog-pair" }
c = [0.05, 0.1]
"#;
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.map, MapSpec::Ilog { k: 1, a: 1.0 });
        assert_eq!(cfg.x_min_value(), 1e-12);
        assert!(cfg.explicit_omega_big().unwrap().is_some());
    }

    #[test]
    fn diagnostics_name_the_field() {
        let bad = POWER_MAP.replace("s = 0.5", "s = -1.0");
        assert!(RunConfig::parse(&bad).unwrap_err().to_string().contains("map.s"));
        let bad = POWER_MAP.replace("grid = 4096", "grid = 10");
        assert!(RunConfig::parse(&bad).unwrap_err().to_string().contains("grid"));
        let bad = POWER_MAP.replace("0.2*cos(2*pi*x)", "x");
        assert!(RunConfig::parse(&bad).unwrap_err().to_string().contains("potential"));
        let bad = format!("{POWER_MAP}\n[gibbs]\nr = 0.5\n");
        assert!(RunConfig::parse(&bad).unwrap_err().to_string().contains("gibbs.r"));
        let bad = POWER_MAP.replace("grid = 4096", "grid = 4096\nc = [0.3]");
        assert!(RunConfig::parse(&bad).unwrap_err().to_string().contains("c"));
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = RunConfig::parse("potential = \n").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
        let err = RunConfig::parse(&POWER_MAP.replace("grid = 4096", "gird = 4096")).unwrap_err().to_string();
        assert!(err.contains("gird"), "{err}");
    }
}
