//! Run configuration: a sectioned key/value file (TOML subset).
//!
//! ```text
//! [run]
//! model = "stirap_const"            # stirap_const | stirap_gauss | transmon | mlz
//! strategies = ["none", "w1w2"]
//! seed = 0
//!
//! [sweep]
//! parameter = "nu"
//! grid = "log"                      # linear | log | list
//! lo = 0.1
//! hi = 3.0
//! n = 40
//! # values = [0.5, 1.0]             # for grid = "list"
//!
//! [model]                           # fixed model parameters
//! g0 = 1.0
//!
//! [tolerances]
//! ode = 1e-10
//! threshold = 1e-3
//!
//! [output]
//! dir = "out"
//! name = "sweep"
//! pulses_at = [0.5]
//! pulse_samples = 401
//! amplitude_samples = 2001
//!
//! [drag]                            # transmon drag_baseline only
//! y_coeff = -1.0
//! detuning_coeff = 0.5
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use leakfree::models::transmon::DragFormula;
use leakfree::sweep::{linear_grid, log_grid};

pub const MIN_TOL: f64 = 1e-13;
pub const MAX_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "stirap_const")]
    StirapConst,
    #[serde(rename = "stirap_gauss")]
    StirapGauss,
    #[serde(rename = "transmon")]
    Transmon,
    #[serde(rename = "mlz")]
    Mlz,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::StirapConst => "stirap_const",
            ModelKind::StirapGauss => "stirap_gauss",
            ModelKind::Transmon => "transmon",
            ModelKind::Mlz => "mlz",
        }
    }

    pub fn strategies(&self) -> &'static [StrategyKind] {
        use StrategyKind::*;
        match self {
            ModelKind::StirapConst => &[None, W1, W1W2, W2Optimal, Satd],
            ModelKind::StirapGauss => &[None, W1, W1W2],
            ModelKind::Transmon => &[None, IdealMagnus, ConstrainedMagnus, DragBaseline],
            ModelKind::Mlz => &[None, Td, Satd, W1, W1W2],
        }
    }

    /// Keys accepted in `[model]`.
    pub fn parameters(&self) -> &'static [&'static str] {
        match self {
            ModelKind::StirapConst => &["g0", "nu", "delta_bound"],
            ModelKind::StirapGauss => &["g0", "nu", "delta_bound", "delay_product", "alpha_lo", "alpha_hi"],
            ModelKind::Transmon => &["kappa0", "anharmonicity", "lambda", "detuning"],
            ModelKind::Mlz => &["eta", "omega", "spurious_scale", "window_lo", "window_hi"],
        }
    }

    /// Parameters that may be swept.
    pub fn sweepable(&self) -> &'static [&'static str] {
        match self {
            ModelKind::StirapConst => &["nu", "g0", "delta_bound"],
            ModelKind::StirapGauss => &["nu", "g0", "delay_product"],
            ModelKind::Transmon => &["kappa0", "anharmonicity", "lambda", "detuning"],
            ModelKind::Mlz => &["eta", "omega", "spurious_scale"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "w1")]
    W1,
    #[serde(rename = "w1w2")]
    W1W2,
    #[serde(rename = "w2_optimal")]
    W2Optimal,
    #[serde(rename = "satd")]
    Satd,
    #[serde(rename = "td")]
    Td,
    #[serde(rename = "drag_baseline")]
    DragBaseline,
    #[serde(rename = "constrained_magnus")]
    ConstrainedMagnus,
    #[serde(rename = "ideal_magnus")]
    IdealMagnus,
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::None => "none",
            StrategyKind::W1 => "w1",
            StrategyKind::W1W2 => "w1w2",
            StrategyKind::W2Optimal => "w2_optimal",
            StrategyKind::Satd => "satd",
            StrategyKind::Td => "td",
            StrategyKind::DragBaseline => "drag_baseline",
            StrategyKind::ConstrainedMagnus => "constrained_magnus",
            StrategyKind::IdealMagnus => "ideal_magnus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Linear,
    Log,
    List,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub model: ModelKind,
    pub strategies: Vec<StrategyKind>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: String,
    pub grid: GridKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_ode")]
    pub ode: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

fn default_ode() -> f64 {
    1e-10
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { ode: default_ode(), threshold: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub pulses_at: Vec<f64>,
    #[serde(default = "default_pulse_samples")]
    pub pulse_samples: usize,
    #[serde(default = "default_amplitude_samples")]
    pub amplitude_samples: usize,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_name() -> String {
    "sweep".into()
}

fn default_pulse_samples() -> usize {
    401
}

fn default_amplitude_samples() -> usize {
    2001
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            name: default_name(),
            pulses_at: Vec::new(),
            pulse_samples: default_pulse_samples(),
            amplitude_samples: default_amplitude_samples(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DragSection {
    pub y_coeff: f64,
    pub detuning_coeff: f64,
}

impl From<DragSection> for DragFormula {
    fn from(d: DragSection) -> Self {
        DragFormula { y_coeff: d.y_coeff, detuning_coeff: d.detuning_coeff }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub model: BTreeMap<String, f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drag: Option<DragSection>,
}

impl RunConfig {
    /// Parse without validating.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.message().to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::parse(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Grid values in sweep order.
    pub fn grid(&self) -> Result<Vec<f64>, ConfigError> {
        let s = &self.sweep;
        let values = match s.grid {
            GridKind::Linear | GridKind::Log => {
                let (Some(lo), Some(hi), Some(n)) = (s.lo, s.hi, s.n) else {
                    return bad("linear and log grids need lo, hi and n");
                };
                if s.values.is_some() {
                    return bad("values is only allowed with grid = \"list\"");
                }
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad(format!("grid needs finite lo < hi, got [{lo}, {hi}]"));
                }
                if n < 2 {
                    return bad(format!("grid needs n >= 2, got {n}"));
                }
                if s.grid == GridKind::Linear {
                    linear_grid(lo, hi, n)
                } else {
                    log_grid(lo, hi, n).map_err(|e| ConfigError(e.to_string()))?
                }
            }
            GridKind::List => {
                if s.lo.is_some() || s.hi.is_some() || s.n.is_some() {
                    return bad("lo, hi and n are not allowed with grid = \"list\"");
                }
                let Some(v) = s.values.clone() else {
                    return bad("grid = \"list\" needs values");
                };
                v
            }
        };
        if values.is_empty() {
            return bad("sweep grid is empty");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return bad("sweep grid contains a non-finite value");
        }
        let up = values.windows(2).all(|w| w[1] > w[0]);
        let down = values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return bad("sweep grid must be strictly monotone");
        }
        Ok(values)
    }

    pub fn drag_formula(&self) -> Option<DragFormula> {
        self.drag.map(Into::into)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let model = self.run.model;
        if self.run.strategies.is_empty() {
            return bad("run.strategies is empty");
        }
        for (k, s) in self.run.strategies.iter().enumerate() {
            if !model.strategies().contains(s) {
                return bad(format!("strategy {} is not available for model {}", s.name(), model.name()));
            }
            if self.run.strategies[..k].contains(s) {
                return bad(format!("strategy {} listed twice", s.name()));
            }
        }
        if self.run.strategies.contains(&StrategyKind::DragBaseline) && self.drag.is_none() {
            return bad("strategy drag_baseline needs a [drag] section");
        }
        for (key, v) in &self.model {
            if !model.parameters().contains(&key.as_str()) {
                return bad(format!("model key {key} is not used by model {}", model.name()));
            }
            if !v.is_finite() {
                return bad(format!("model key {key} is not finite"));
            }
        }
        if !model.sweepable().contains(&self.sweep.parameter.as_str()) {
            return bad(format!("parameter {} cannot be swept for model {}", self.sweep.parameter, model.name()));
        }
        if self.model.contains_key(&self.sweep.parameter) {
            return bad(format!("swept parameter {} is also fixed in [model]", self.sweep.parameter));
        }
        let tol = self.tolerances.ode;
        if !(MIN_TOL..=MAX_TOL).contains(&tol) {
            return bad(format!("tolerances.ode must lie in [{MIN_TOL:e}, {MAX_TOL:e}], got {tol:e}"));
        }
        if let Some(th) = self.tolerances.threshold {
            if !(th > 0.0 && th < 1.0) {
                return bad(format!("tolerances.threshold must lie in (0, 1), got {th}"));
            }
        }
        if self.output.name.is_empty() || self.output.name.contains(['/', '\\']) {
            return bad("output.name must be a plain file stem");
        }
        if self.output.pulse_samples < 2 || self.output.amplitude_samples < 2 {
            return bad("output sample counts must be at least 2");
        }
        for v in self.grid()?.into_iter().chain(self.output.pulses_at.iter().copied()) {
            crate::runner::Point::new(self, v).map_err(|e| ConfigError(format!("{} = {v}: {e}", self.sweep.parameter)))?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialization, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output.dir = PathBuf::new();
        let text = toml::to_string(&canon).unwrap_or_default();
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}
