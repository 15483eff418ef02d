//! Job configuration: JSON schema, loading and validation.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::density::{self, Table};

pub const DEFAULT_SITES: usize = 50;
pub const DEFAULT_GRID_POINTS: usize = 512;
/// Recurrence depth the core computes at most.
pub const MAX_PAIRS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub spectral_density: DensitySpec,
    pub mapping_q: f64,
    #[serde(default = "default_sites")]
    pub sites: usize,
    #[serde(default)]
    pub residual_orders: Vec<usize>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    /// `J(ω) = 2πα ω_c^{1-s} ω^s` on `[0, ω_c]`.
    PowerLaw { s: f64, alpha: f64, omega_c: f64 },
    /// `J(ω) = 2πα ω_c^{1-s} ω^s e^{-ω/ω_c}` on `[0, ∞)`.
    PowerLawExpCutoff { s: f64, alpha: f64, omega_c: f64 },
    /// Samples `omega,J` in a CSV file, interpolated monotonically.
    Tabulated { path: PathBuf },
    /// Polynomial pieces `J(ω) = Σ c_k ω^k` on disjoint intervals.
    Piecewise { intervals: Vec<Piece> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub coefficients: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub range: Option<[f64; 2]>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { points: DEFAULT_GRID_POINTS, range: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_chain")]
    pub chain_csv: PathBuf,
    #[serde(default = "default_residual")]
    pub residual_csv: PathBuf,
    #[serde(default = "default_report")]
    pub report_json: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { chain_csv: default_chain(), residual_csv: default_residual(), report_json: default_report() }
    }
}

fn default_sites() -> usize {
    DEFAULT_SITES
}
fn default_points() -> usize {
    DEFAULT_GRID_POINTS
}
fn default_chain() -> PathBuf {
    "chain.csv".into()
}
fn default_residual() -> PathBuf {
    "residual.csv".into()
}
fn default_report() -> PathBuf {
    "report.json".into()
}

/// Invalid configuration, located by a dotted field path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError { path: path.into(), reason: reason.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "config: {}", self.reason)
        } else {
            write!(f, "config `{}`: {}", self.path, self.reason)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub q: Option<f64>,
    pub sites: Option<usize>,
}

/// A configuration that passed validation, with relative paths anchored.
#[derive(Clone, Debug)]
pub struct ValidJob {
    pub config: JobConfig,
    /// Directory relative input paths are resolved against.
    pub base_dir: PathBuf,
    pub table: Option<Table>,
}

pub fn parse(text: &str) -> Result<JobConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        ConfigError::new(path, e.into_inner().to_string())
    })
}

/// Reads, overrides and validates the file at `path`.
pub fn load(path: &Path, overrides: &Overrides) -> Result<ValidJob, ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    let mut config = parse(&text)?;
    if let Some(q) = overrides.q {
        config.mapping_q = q;
    }
    if let Some(n) = overrides.sites {
        config.sites = n;
    }
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    validate(config, base_dir)
}

pub fn validate(config: JobConfig, base_dir: PathBuf) -> Result<ValidJob, ConfigError> {
    let table = validate_density(&config.spectral_density, &base_dir)?;
    let q = config.mapping_q;
    if !(0.0..=1.0).contains(&q) {
        return Err(ConfigError::new("mapping_q", "must lie in [0, 1]"));
    }
    if config.sites == 0 || config.sites >= MAX_PAIRS {
        return Err(ConfigError::new("sites", format!("must lie in 1..={}", MAX_PAIRS - 1)));
    }
    if !config.residual_orders.is_empty() && q != 0.0 && q != 1.0 {
        return Err(ConfigError::new(
            "residual_orders",
            "residual densities are supported only for mapping_q 0 and 1",
        ));
    }
    for (i, &n) in config.residual_orders.iter().enumerate() {
        if n >= MAX_PAIRS {
            return Err(ConfigError::new(format!("residual_orders[{i}]"), format!("must be below {MAX_PAIRS}")));
        }
    }
    if config.grid.points < 2 {
        return Err(ConfigError::new("grid.points", "need at least 2 points"));
    }
    if let Some([lo, hi]) = config.grid.range {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(ConfigError::new("grid.range", "must be finite with lo < hi"));
        }
    }
    Ok(ValidJob { config, base_dir, table })
}

fn validate_density(spec: &DensitySpec, base_dir: &Path) -> Result<Option<Table>, ConfigError> {
    match spec {
        DensitySpec::PowerLaw { s, alpha, omega_c } | DensitySpec::PowerLawExpCutoff { s, alpha, omega_c } => {
            if !(s.is_finite() && *s > -1.0) {
                return Err(ConfigError::new("spectral_density.s", "must be finite and > -1"));
            }
            if !(alpha.is_finite() && *alpha > 0.0) {
                return Err(ConfigError::new("spectral_density.alpha", "must be finite and > 0"));
            }
            if !(omega_c.is_finite() && *omega_c > 0.0) {
                return Err(ConfigError::new("spectral_density.omega_c", "must be finite and > 0"));
            }
            Ok(None)
        }
        DensitySpec::Tabulated { path } => {
            let full = base_dir.join(path);
            let table = density::read_table(&full).map_err(|r| ConfigError::new("spectral_density.path", r))?;
            Ok(Some(table))
        }
        DensitySpec::Piecewise { intervals } => {
            if intervals.is_empty() {
                return Err(ConfigError::new("spectral_density.intervals", "need at least one interval"));
            }
            let mut prev_hi = f64::NEG_INFINITY;
            for (i, p) in intervals.iter().enumerate() {
                let at = |f: &str| format!("spectral_density.intervals[{i}].{f}");
                if !(p.lo.is_finite() && p.hi.is_finite() && p.lo >= 0.0 && p.lo < p.hi) {
                    return Err(ConfigError::new(at("lo"), "need finite 0 <= lo < hi"));
                }
                if p.lo < prev_hi {
                    return Err(ConfigError::new(at("lo"), "intervals must be sorted and disjoint"));
                }
                if p.coefficients.is_empty() || p.coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(ConfigError::new(at("coefficients"), "need at least one finite coefficient"));
                }
                for k in 0..=64 {
                    let w = p.lo + (p.hi - p.lo) * k as f64 / 64.0;
                    let v = density::horner(&p.coefficients, w);
                    if v < 0.0 {
                        return Err(ConfigError::new(at("coefficients"), format!("J({w}) = {v} is negative")));
                    }
                }
                prev_hi = p.hi;
            }
            Ok(None)
        }
    }
}
