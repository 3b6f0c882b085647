//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::initial_data::DataSpec;
use crate::littlewood_paley::BesovSpec;
use crate::model::{Params, PressureLaw, SystemVariant};
use crate::solver::TimeStepperConfig;

fn default_length() -> f64 {
    2.0 * std::f64::consts::PI
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    #[serde(default = "default_length")]
    pub length: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1, 2 or 3, got {}", self.dim)));
        }
        if self.n < 8 || !self.n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n must be a power of two ≥ 8, got {}", self.n)));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {}", self.length)));
        }
        if self.n.checked_pow(self.dim as u32).is_none_or(|t| t > 1 << 24) {
            return Err(Error::InvalidGrid(format!("{}^{} points exceed the supported size", self.n, self.dim)));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Grid> {
        self.validate()?;
        Grid::new(self.dim, self.n, self.length)
    }
}

/// Which field a Besov diagnostic measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSel {
    /// `ln rho`.
    Q,
    /// `rho - 1`.
    Rho,
    /// Velocity, blocks measured on the vector.
    U,
}

impl FieldSel {
    pub fn name(&self) -> &'static str {
        match self {
            FieldSel::Q => "q",
            FieldSel::Rho => "rho",
            FieldSel::U => "u",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiagnosticSpec {
    Besov { field: FieldSel, s: f64, p: f64, r: f64 },
    Energy,
    Linf {
        #[serde(default)]
        bound: Option<f64>,
    },
}

impl DiagnosticSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DiagnosticSpec::Besov { field, s, p, r } => {
                BesovSpec::new(*s, *p, *r).validate()?;
                if *field == FieldSel::U && *p != 2.0 {
                    return Err(Error::InvalidNormSpec("velocity Besov norms are measured with p = 2".into()));
                }
                Ok(())
            }
            DiagnosticSpec::Linf { bound: Some(b) } if !(*b > 0.0) => {
                Err(Error::InvalidParams(format!("L∞ bound must be positive, got {b}")))
            }
            _ => Ok(()),
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// A complete, self-describing run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub variant: SystemVariant,
    pub grid: GridSpec,
    pub params: Params,
    pub stepper: TimeStepperConfig,
    pub data: DataSpec,
    #[serde(default)]
    pub diagnostics: Vec<DiagnosticSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Drop the nonlinear terms and evolve with the linear semigroup only.
    #[serde(default)]
    pub mute_nonlinearity: bool,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    /// Every check that can run before any field is allocated.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.params.validate(self.grid.dim)?;
        self.stepper.validate()?;
        self.data.validate(self.grid.dim)?;
        for d in &self.diagnostics {
            d.validate()?;
        }
        match self.variant {
            SystemVariant::Effective | SystemVariant::Perturbation if !self.params.in_quasi_solution_regime() => {
                return Err(Error::Regime(format!(
                    "variant {:?} requires κ = μ² and λ = 0 (μ = {}, λ = {}, κ = {})",
                    self.variant, self.params.mu, self.params.lambda, self.params.kappa
                )));
            }
            _ => {}
        }
        if self.variant == SystemVariant::Perturbation {
            if !matches!(self.data, DataSpec::QuasiSolution { .. }) {
                return Err(Error::InvalidParams("variant perturbation requires quasi_solution data".into()));
            }
            if !matches!(self.params.pressure, PressureLaw::Linear { .. }) {
                return Err(Error::InvalidParams("variant perturbation requires a linear pressure law".into()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("configs serialize");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// A small, fully resolved small-data run used as the default for suites.
    pub fn default_small_data() -> Self {
        Self {
            variant: SystemVariant::Nhv1,
            grid: GridSpec { dim: 2, n: 32, length: default_length() },
            params: Params::new(0.5, 0.0, 0.25, PressureLaw::Linear { k: 1.0 }),
            stepper: TimeStepperConfig::new(2e-3, 0.2, crate::solver::Scheme::ExpRk2),
            data: DataSpec::SmoothNoise { amplitude: 0.05, kmax: 3 },
            diagnostics: vec![DiagnosticSpec::Energy, DiagnosticSpec::Linf { bound: None }],
            seed: 1,
            output: default_output(),
            mute_nonlinearity: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
variant = "nhv1"
seed = 3

[grid]
dim = 2
n = 32

[params]
mu = 0.5
lambda = 0.0
kappa = 0.25

[params.pressure]
type = "gamma"
a = 1.0
gamma = 1.4

[stepper]
dt = 0.01
horizon = 0.1

[data]
kind = "gaussian_bump"
amplitude = 0.2
width = 0.7

[[diagnostics]]
kind = "besov"
field = "q"
s = 1.0
p = 2.0
r = inf

[[diagnostics]]
kind = "energy"
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.grid.length, default_length());
        assert_eq!(cfg.diagnostics.len(), 2);
        let again = RunConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = SAMPLE.replace("lambda = 0.0", "lambda = -1.5");
        let e = RunConfig::from_toml_str(&bad).unwrap_err().to_string();
        assert!(e.contains("2μ+λ>0 violated"), "{e}");
        let bad = SAMPLE.replace("n = 32", "n = 30");
        assert!(matches!(RunConfig::from_toml_str(&bad), Err(Error::InvalidGrid(_))));
        let bad = SAMPLE.replace("seed = 3", "seed = 3\nbogus = 1");
        assert!(matches!(RunConfig::from_toml_str(&bad), Err(Error::Format(_))));
        let bad = SAMPLE.replace("variant = \"nhv1\"", "variant = \"effective\"").replace("kappa = 0.25", "kappa = 0.3");
        assert!(matches!(RunConfig::from_toml_str(&bad), Err(Error::Regime(_))));
    }

    #[test]
    fn default_config_is_valid() {
        RunConfig::default_small_data().validate().unwrap();
    }
}
