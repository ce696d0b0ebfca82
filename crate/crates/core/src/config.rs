//! Run configuration: a strict JSON document mirroring [`ProblemSpec`] plus
//! output and sweep settings.
//!
//! ```json
//! {
//!   "factors": [{"dim": 2}, {"dim": 3, "lambda": 2.0}],
//!   "gauge_c": -1.0,
//!   "seed": {"eps0": -1e-4, "eps": [0.01]},
//!   "mode": "soliton",
//!   "controls": {"rtol": 1e-10},
//!   "output": {"dir": "out", "formats": ["csv", "json"], "thin": 1, "plots": ["g1", "u_dot"]},
//!   "sweep": {"factor": 2, "ratios": [25, 50, 75, 100, 125]}
//! }
//! ```
//!
//! Defaults: `lambda = dim - 1`, `gauge_c = -1`, `eps0 = -1e-4`,
//! `eps_k = sqrt(|eps0| / (r - 1))`, controls as in [`StepControls::default`].

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    default_s_max, default_seed_coeffs, validate_spec, FactorSpec, Mode, ModelError, ProblemSpec,
    StepControls, DEFAULT_EPS0,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Validation(#[from] ModelError),
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Parse { .. } => "ParseError",
            Self::Invalid { .. } => "ValidationError",
            Self::Validation(e) => e.code(),
            Self::Io { .. } => "IoError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    pub dim: usize,
    #[serde(default)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub eps0: f64,
    /// Coefficients on `Y_2 .. Y_r`.
    pub eps: Option<Vec<f64>>,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            eps0: DEFAULT_EPS0,
            eps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(ConfigError::Invalid {
                field: "format".into(),
                message: format!("unknown format `{other}`, expected csv or json"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
    /// Keep every `thin`-th profile row (the last row is always kept).
    pub thin: usize,
    /// Quantities written as `<name>_vs_t.dat`.
    pub plots: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            formats: vec![Format::Csv],
            thin: 1,
            plots: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// 1-based factor whose seed coefficient is varied.
    pub factor: usize,
    /// Values of `eps_factor / |eps0|`.
    pub ratios: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            factor: 2,
            ratios: vec![25.0, 50.0, 75.0, 100.0, 125.0],
        }
    }
}

fn default_gauge() -> f64 {
    -1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub factors: Vec<FactorConfig>,
    #[serde(default = "default_gauge")]
    pub gauge_c: f64,
    #[serde(default)]
    pub seed: SeedConfig,
    #[serde(default)]
    pub s_start: f64,
    #[serde(default)]
    pub s_max: Option<f64>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub controls: StepControls,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn seed_coeffs(&self) -> Vec<f64> {
        let r = self.rank();
        match &self.seed.eps {
            Some(eps) => std::iter::once(self.seed.eps0).chain(eps.iter().copied()).collect(),
            None => default_seed_coeffs(r, self.seed.eps0),
        }
    }

    pub fn to_spec(&self) -> Result<ProblemSpec, ConfigError> {
        let factors = self
            .factors
            .iter()
            .map(|f| FactorSpec::new(f.dim, f.lambda.unwrap_or(f.dim as f64 - 1.0)))
            .collect();
        let spec = ProblemSpec {
            factors,
            gauge_c: self.gauge_c,
            seed_coeffs: self.seed_coeffs(),
            s_start: self.s_start,
            s_max: self.s_max.unwrap_or_else(|| default_s_max(self.mode)),
            controls: self.controls,
            mode: self.mode,
        };
        Ok(validate_spec(spec)?)
    }

    /// Overrides the relative tolerance.
    pub fn set_tol(&mut self, tol: f64) {
        self.controls.rtol = tol;
    }

    /// Sets the seed coefficient of 1-based factor `index ≥ 2`.
    pub fn set_eps(&mut self, index: usize, value: f64) -> Result<(), ConfigError> {
        let r = self.rank();
        if index < 2 || index > r {
            return Err(ConfigError::Invalid {
                field: "seed.eps".into(),
                message: format!("factor index {index} outside 2..={r}"),
            });
        }
        let mut eps = self.seed_coeffs()[1..].to_vec();
        eps[index - 2] = value;
        self.seed.eps = Some(eps);
        Ok(())
    }

    fn check(&self) -> Result<(), ConfigError> {
        let invalid = |field: &str, message: String| {
            Err(ConfigError::Invalid {
                field: field.into(),
                message,
            })
        };
        if let Some(eps) = &self.seed.eps {
            if eps.len() + 1 != self.rank() {
                return invalid(
                    "seed.eps",
                    format!("expected {} values, got {}", self.rank().saturating_sub(1), eps.len()),
                );
            }
        }
        if self.output.thin == 0 {
            return invalid("output.thin", "must be at least 1".into());
        }
        for q in &self.output.plots {
            if crate::export::PlotQuantity::parse(q, self.rank()).is_none() {
                return invalid("output.plots", format!("unknown quantity `{q}`"));
            }
        }
        Ok(())
    }
}

/// Strict parse of inline JSON text; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.check()?;
    cfg.to_spec()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}
