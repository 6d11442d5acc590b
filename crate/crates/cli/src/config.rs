//! Scenario configuration: a single TOML file declaring the alphabet, the
//! sampling measure, the fiber family, the cocycle generator, the marked
//! fixed/homoclinic points, and a list of experiment blocks. Complex
//! numbers are written as [re, im] pairs.

use serde::{Deserialize, Serialize};

use cocycle_lab::error::CocycleError;
use cocycle_lab::linalg::{CMat, C64};
use cocycle_lab::lincocycle::{Cocycle, CocycleGenerator};
use cocycle_lab::simplicity::{bump_example, BumpExampleCertificate};
use cocycle_lab::skewprod::FiberMapFamily;
use cocycle_lab::symbolic::{
    make_fixed_point, make_homoclinic, BiSequence, FiberMeasure, MeasureSpec, Symbol,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl From<CocycleError> for ConfigError {
    fn from(e: CocycleError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

pub type Cx = [f64; 2];

fn cx(v: Cx) -> C64 {
    C64::new(v[0], v[1])
}

fn matrix(rows: &[Vec<Cx>]) -> Result<CMat, ConfigError> {
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows.len()) {
        return Err(ConfigError::Invalid("matrix must be square".into()));
    }
    let d = rows.len();
    Ok(CMat::from_fn(d, d, |i, j| cx(rows[i][j])))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub alphabet: AlphabetConfig,
    pub measure: MeasureConfig,
    pub family: FamilyConfig,
    pub fixed_point: FixedPointConfig,
    #[serde(default)]
    pub homoclinic: Option<HomoclinicConfig>,
    pub cocycle: CocycleConfig,
    #[serde(default, rename = "experiment")]
    pub experiments: Vec<ExperimentBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AlphabetConfig {
    pub size: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeasureConfig {
    pub weights: Vec<f64>,
    #[serde(default)]
    pub fiber_density_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FamilyConfig {
    pub kind: String,
    #[serde(default)]
    pub window: usize,
    pub angles: Vec<f64>,
    #[serde(default)]
    pub amplitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FixedPointConfig {
    pub symbol: Symbol,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HomoclinicConfig {
    pub core: Vec<Symbol>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CocycleConfig {
    pub kind: String,
    #[serde(default = "default_alpha")]
    pub holder_alpha: f64,
    #[serde(default)]
    pub entries: Option<Vec<Cx>>,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<Cx>>>,
    #[serde(default)]
    pub tau: Option<Vec<Cx>>,
    #[serde(default)]
    pub perturbation: Option<Vec<Vec<Cx>>>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub minor_margin: Option<f64>,
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentBlock {
    pub name: String,
    pub op: String,
    pub seed: u64,
    /// Free-form numeric parameters; each op documents its own set and
    /// defaults (see `describe`).
    #[serde(default)]
    pub params: std::collections::BTreeMap<String, f64>,
    /// List-valued parameters (e.g. the n schedule of a push-forward).
    #[serde(default)]
    pub list_params: std::collections::BTreeMap<String, Vec<f64>>,
}

impl ExperimentBlock {
    pub fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    pub fn uparam(&self, key: &str, default: usize) -> usize {
        self.params.get(key).map(|v| *v as usize).unwrap_or(default)
    }
}

/// Everything an experiment block needs, built once per scenario.
pub struct ScenarioContext {
    pub config: ScenarioConfig,
    pub spec: MeasureSpec,
    pub cocycle: Cocycle,
    pub fixed_point: BiSequence,
    pub homoclinic: Option<(BiSequence, usize)>,
    pub certificate: Option<BumpExampleCertificate>,
}

pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
    Ok(toml::from_str(text)?)
}

pub fn build(config: ScenarioConfig) -> Result<ScenarioContext, ConfigError> {
    let n = config.alphabet.size;
    if n < 2 {
        return Err(ConfigError::Invalid(format!(
            "alphabet size must be at least 2, got {n}"
        )));
    }
    if config.measure.weights.len() != n {
        return Err(ConfigError::Invalid(format!(
            "need {n} Bernoulli weights, got {}",
            config.measure.weights.len()
        )));
    }
    let fiber = match &config.measure.fiber_density_grid {
        None => FiberMeasure::LebesgueCircle,
        Some(grid) => FiberMeasure::DensityGrid(grid.clone()),
    };
    let spec = MeasureSpec::new(config.measure.weights.clone(), fiber, None)?;

    let family = match config.family.kind.as_str() {
        "rotation" => {
            FiberMapFamily::rotation(n, config.family.window, config.family.angles.clone())?
        }
        "perturbed-rotation" => FiberMapFamily::perturbed_rotation(
            n,
            config.family.window,
            config.family.angles.clone(),
            config.family.amplitude,
        )?,
        other => {
            return Err(ConfigError::Invalid(format!(
                "unknown family kind '{other}'"
            )))
        }
    };

    let s = config.fixed_point.symbol;
    if (s as usize) >= n {
        return Err(ConfigError::Invalid(format!(
            "fixed point symbol {s} outside the alphabet"
        )));
    }
    let fixed_point = make_fixed_point(s);
    let homoclinic = match &config.homoclinic {
        None => None,
        Some(h) => {
            if h.core.iter().any(|c| (*c as usize) >= n) {
                return Err(ConfigError::Invalid(
                    "homoclinic core contains symbols outside the alphabet".into(),
                ));
            }
            Some(make_homoclinic(&h.core, s)?)
        }
    };

    let alpha = config.cocycle.holder_alpha;
    let mut certificate = None;
    let gen =
        match config.cocycle.kind.as_str() {
            "diagonal" => {
                let entries = config.cocycle.entries.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("diagonal cocycle needs 'entries'".into())
                })?;
                CocycleGenerator::diagonal(entries.iter().map(|e| cx(*e)).collect(), alpha)?
            }
            "constant" => {
                let m = config.cocycle.matrix.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("constant cocycle needs 'matrix'".into())
                })?;
                CocycleGenerator::constant(matrix(m)?, alpha)?
            }
            "bump" => {
                let tau = config
                    .cocycle
                    .tau
                    .as_ref()
                    .ok_or_else(|| ConfigError::Invalid("bump cocycle needs 'tau'".into()))?;
                let pert = config.cocycle.perturbation.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("bump cocycle needs 'perturbation'".into())
                })?;
                let radius = config
                    .cocycle
                    .radius
                    .ok_or_else(|| ConfigError::Invalid("bump cocycle needs 'radius'".into()))?;
                let margin = config.cocycle.minor_margin.unwrap_or(1e-6);
                let core = config
                    .homoclinic
                    .as_ref()
                    .ok_or_else(|| {
                        ConfigError::Invalid("bump cocycle needs a [homoclinic] section".into())
                    })?
                    .core
                    .clone();
                let taus: Vec<C64> = tau.iter().map(|e| cx(*e)).collect();
                let (gen, _, _, _, cert) =
                    bump_example(&taus, &matrix(pert)?, radius, &core, s, alpha, margin)?;
                certificate = Some(cert);
                gen
            }
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown cocycle kind '{other}'"
                )))
            }
        };

    Ok(ScenarioContext {
        spec,
        cocycle: Cocycle::new(gen, family),
        fixed_point,
        homoclinic,
        certificate,
        config,
    })
}
