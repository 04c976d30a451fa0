//! Run configuration: a TOML file with flag overrides, resolved into the
//! settings consumed by the training loop.
//!
//! Unknown keys are rejected at parse time. Defaults follow the reference
//! experiments: α schedule a=0.08, b=20, v=0.005; gradient shot budget
//! β=0.1 between 100 and 5000 shots; ADAM learning rate 0.1 (0.01 for the
//! PES pipeline); 300 iterations.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{self, Dataset, FunctionKind, PesSplit};
use crate::qnn::{CircuitLayout, CostKind, Entangling};
use crate::train::{
    AlphaSchedule, Regularization, ShotMode, ShotPolicy, TrainSettings,
};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "VARQNN_OUTPUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub layout: LayoutConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub regularization: RegularizationConfig,
    #[serde(default)]
    pub shots: ShotsConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_cost")]
    pub cost: CostName,
    #[serde(default = "default_beta_encoding")]
    pub beta_encoding: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Optional seed batch; takes precedence over `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config must deserialize")
    }
}

fn default_cost() -> CostName {
    CostName::SumZ
}
fn default_beta_encoding() -> f64 {
    2.0
}
fn default_seed() -> u64 {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostName {
    SumZ,
    IsingZz,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    #[serde(default = "default_n_qubits")]
    pub n_qubits: usize,
    #[serde(default = "default_n_layers")]
    pub n_layers: usize,
    #[serde(default = "default_entangling")]
    pub entangling: Entangling,
    /// Explicit qubit → feature assignment; cyclic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_map: Option<Vec<usize>>,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            n_qubits: default_n_qubits(),
            n_layers: default_n_layers(),
            entangling: default_entangling(),
            feature_map: None,
        }
    }
}

fn default_n_qubits() -> usize {
    10
}
fn default_n_layers() -> usize {
    3
}
fn default_entangling() -> Entangling {
    Entangling::Circular
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum DatasetConfig {
    Log {
        #[serde(default = "default_n_points")]
        n_points: usize,
    },
    Abs {
        #[serde(default = "default_n_points")]
        n_points: usize,
    },
    Oscillation {
        #[serde(default = "default_n_points")]
        n_points: usize,
    },
    PesCsv {
        path: PathBuf,
        #[serde(default = "default_n_train")]
        n_train: usize,
    },
    PesSynthetic {
        #[serde(default = "default_n_samples")]
        n_samples: usize,
        #[serde(default = "default_n_train")]
        n_train: usize,
    },
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Log {
            n_points: default_n_points(),
        }
    }
}

fn default_n_points() -> usize {
    20
}
fn default_n_train() -> usize {
    50
}
fn default_n_samples() -> usize {
    97
}

impl DatasetConfig {
    pub fn n_features(&self) -> usize {
        match self {
            DatasetConfig::Log { .. }
            | DatasetConfig::Abs { .. }
            | DatasetConfig::Oscillation { .. } => 1,
            DatasetConfig::PesCsv { .. } | DatasetConfig::PesSynthetic { .. } => 3,
        }
    }

    pub fn is_pes(&self) -> bool {
        self.n_features() == 3
    }

    pub fn function_kind(&self) -> Option<FunctionKind> {
        match self {
            DatasetConfig::Log { .. } => Some(FunctionKind::Log),
            DatasetConfig::Abs { .. } => Some(FunctionKind::Abs),
            DatasetConfig::Oscillation { .. } => Some(FunctionKind::Oscillation),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "mode")]
pub enum RegularizationConfig {
    None,
    Constant {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Scheduled {
        #[serde(default = "default_a")]
        a: f64,
        #[serde(default = "default_b")]
        b: f64,
        #[serde(default = "default_v")]
        v: f64,
    },
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        RegularizationConfig::Scheduled {
            a: default_a(),
            b: default_b(),
            v: default_v(),
        }
    }
}

fn default_alpha() -> f64 {
    0.005
}
fn default_a() -> f64 {
    AlphaSchedule::DEFAULT.a
}
fn default_b() -> f64 {
    AlphaSchedule::DEFAULT.b
}
fn default_v() -> f64 {
    AlphaSchedule::DEFAULT.v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "mode")]
pub enum ShotsConfig {
    Exact,
    Sampled {
        #[serde(default = "default_rsd_bound")]
        rsd_bound: f64,
        #[serde(default = "default_min_shots")]
        min_shots: u64,
        #[serde(default = "default_max_shots")]
        max_shots: u64,
    },
}

impl Default for ShotsConfig {
    fn default() -> Self {
        ShotsConfig::Sampled {
            rsd_bound: default_rsd_bound(),
            min_shots: default_min_shots(),
            max_shots: default_max_shots(),
        }
    }
}

fn default_rsd_bound() -> f64 {
    ShotPolicy::DEFAULT.rsd_bound
}
fn default_min_shots() -> u64 {
    ShotPolicy::DEFAULT.min_shots
}
fn default_max_shots() -> u64 {
    ShotPolicy::DEFAULT.max_shots
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Defaults to 0.1, or 0.01 when training on a PES dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: None,
            max_iters: default_max_iters(),
        }
    }
}

fn default_max_iters() -> u64 {
    300
}

impl TrainConfig {
    /// Parse a TOML config file; unknown keys are rejected with the key
    /// named in the error.
    pub fn from_file(path: &Path) -> Result<Self> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn resolved_learning_rate(&self) -> f64 {
        self.optimizer
            .learning_rate
            .unwrap_or(if self.dataset.is_pes() { 0.01 } else { 0.1 })
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) if !s.is_empty() => s.clone(),
            _ => vec![self.seed],
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        if let Some(dir) = &self.output_dir {
            return dir.clone();
        }
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        PathBuf::from("varqnn-out")
    }

    /// Validate and convert into the training settings for one seed.
    pub fn settings(&self, seed: u64) -> Result<TrainSettings> {
        let n_features = self.dataset.n_features();
        let layout = match &self.layout.feature_map {
            None => CircuitLayout::new(
                self.layout.n_qubits,
                self.layout.n_layers,
                self.layout.entangling,
                n_features,
            )?,
            Some(map) => CircuitLayout::with_feature_map(
                self.layout.n_qubits,
                self.layout.n_layers,
                self.layout.entangling,
                n_features,
                map.clone(),
            )?,
        };
        let regularization = match self.regularization {
            RegularizationConfig::None => Regularization::None,
            RegularizationConfig::Constant { alpha } => {
                if !(alpha > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "regularization.alpha must be positive, got {alpha}"
                    )));
                }
                Regularization::Constant(alpha)
            }
            RegularizationConfig::Scheduled { a, b, v } => {
                let schedule = AlphaSchedule { a, b, v };
                schedule.validate()?;
                Regularization::Scheduled(schedule)
            }
        };
        let shots = match self.shots {
            ShotsConfig::Exact => ShotMode::Exact,
            ShotsConfig::Sampled {
                rsd_bound,
                min_shots,
                max_shots,
            } => {
                let policy = ShotPolicy {
                    rsd_bound,
                    min_shots,
                    max_shots,
                };
                policy.validate()?;
                ShotMode::Sampled(policy)
            }
        };
        let learning_rate = self.resolved_learning_rate();
        if !(learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "optimizer.learning_rate must be positive, got {learning_rate}"
            )));
        }
        if !(self.beta_encoding >= 0.01) {
            return Err(Error::InvalidConfig(format!(
                "beta_encoding must be at least 0.01, got {}",
                self.beta_encoding
            )));
        }
        Ok(TrainSettings {
            layout,
            cost: match self.cost {
                CostName::SumZ => CostKind::SumZ,
                CostName::IsingZz => CostKind::IsingZz,
            },
            beta_encoding: self.beta_encoding,
            regularization,
            shots,
            learning_rate,
            max_iters: self.optimizer.max_iters,
            seed,
            var_points: None,
        })
    }

    /// Materialize the configured dataset.
    pub fn build_data(&self, seed: u64) -> Result<PreparedData> {
        match &self.dataset {
            DatasetConfig::Log { n_points }
            | DatasetConfig::Abs { n_points }
            | DatasetConfig::Oscillation { n_points } => {
                let kind = self.dataset.function_kind().expect("function dataset");
                Ok(PreparedData::Function {
                    kind,
                    train: experiments::gen_function_dataset(kind, *n_points, None)?,
                })
            }
            DatasetConfig::PesCsv { path, n_train } => {
                let records = experiments::load_pes_csv(path)?;
                Ok(PreparedData::Pes {
                    split: experiments::prepare_pes_dataset(&records, *n_train, seed)?,
                })
            }
            DatasetConfig::PesSynthetic { n_samples, n_train } => {
                let records = experiments::synthetic_pes::generate(*n_samples, seed);
                Ok(PreparedData::Pes {
                    split: experiments::prepare_pes_dataset(&records, *n_train, seed)?,
                })
            }
        }
    }
}

/// A built dataset plus whatever the inference stage needs from it.
#[derive(Clone, Debug)]
pub enum PreparedData {
    Function { kind: FunctionKind, train: Dataset },
    Pes { split: PesSplit },
}

impl PreparedData {
    pub fn train(&self) -> &Dataset {
        match self {
            PreparedData::Function { train, .. } => train,
            PreparedData::Pes { split } => &split.train,
        }
    }
}
