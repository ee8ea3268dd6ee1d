//! Experiment configuration files. Unknown keys are errors, not
//! warnings, so typos in experiment specs fail loudly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scorewatch::error::{Error, Result};
use scorewatch::score_net::{BatchPolicy, OptimizerKind, TrainConfig};

pub const EXPERIMENT_FORMAT: &str = "scorewatch-experiment/v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub detection: DetectionSection,
    pub evaluation: EvaluationSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// "ring", "nn", or "csv".
    pub generator: String,
    #[serde(default = "default_n_reference")]
    pub n_reference: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_gmm: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_gmm: Option<PathBuf>,
}

fn default_n_reference() -> usize {
    1000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub noise_draws: usize,
    pub sigma: f64,
    /// "adaptive-moment" or "plain-gradient-descent".
    pub optimizer: String,
    pub standardize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            hidden_dim: 256,
            epochs: 2000,
            learning_rate: 1e-2,
            noise_draws: 1,
            sigma: 1.0,
            optimizer: "adaptive-moment".into(),
            standardize: false,
            batch_size: None,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> Result<TrainConfig> {
        Ok(TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            noise_draws: self.noise_draws,
            sigma: self.sigma,
            optimizer: parse_optimizer(&self.optimizer)?,
            batch: match self.batch_size {
                Some(b) => BatchPolicy::MiniBatch(b),
                None => BatchPolicy::FullBatch,
            },
            rng_seed: seed,
        })
    }
}

pub fn parse_optimizer(name: &str) -> Result<OptimizerKind> {
    match name {
        "adaptive-moment" => Ok(OptimizerKind::AdaptiveMoment),
        "plain-gradient-descent" => Ok(OptimizerKind::PlainGradientDescent),
        other => Err(Error::invalid(format!(
            "unknown optimizer '{other}' (expected adaptive-moment or plain-gradient-descent)"
        ))),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    pub window: usize,
    pub steps: usize,
    pub online_learning_rate: f64,
    pub online_noise_draws: usize,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self {
            window: 10,
            steps: 5,
            online_learning_rate: 1e-4,
            online_noise_draws: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    pub methods: Vec<String>,
    pub gammas: Vec<f64>,
    #[serde(default = "default_calib_iterations")]
    pub calib_iterations: usize,
    #[serde(default = "default_calib_horizon")]
    pub calib_horizon: usize,
    #[serde(default = "default_arl_runs")]
    pub arl_runs: usize,
    #[serde(default = "default_arl_cap_factor")]
    pub arl_cap_factor: f64,
    #[serde(default = "default_wadd_runs")]
    pub wadd_runs: usize,
    #[serde(default = "default_wadd_cap")]
    pub wadd_cap: usize,
}

fn default_calib_iterations() -> usize {
    200
}
fn default_calib_horizon() -> usize {
    1000
}
fn default_arl_runs() -> usize {
    100
}
fn default_arl_cap_factor() -> f64 {
    4.0
}
fn default_wadd_runs() -> usize {
    200
}
fn default_wadd_cap() -> usize {
    4000
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig> {
    let body = std::fs::read_to_string(path).map_err(|e| Error::File {
        path: path.display().to_string(),
        source: e,
    })?;
    let cfg: ExperimentConfig = toml::from_str(&body).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    if cfg.format != EXPERIMENT_FORMAT {
        return Err(Error::invalid(format!(
            "{}: unsupported format tag '{}' (expected {EXPERIMENT_FORMAT})",
            path.display(),
            cfg.format
        )));
    }
    if cfg.evaluation.methods.is_empty() {
        return Err(Error::invalid("evaluation.methods is empty"));
    }
    Ok(cfg)
}

/// `# key = value` provenance lines embedded in every output file.
pub fn provenance_lines<T: Serialize>(command: &str, config: &T) -> Vec<String> {
    let mut lines = vec![format!("command = \"{command}\"")];
    if let Ok(body) = toml::to_string(config) {
        for line in body.lines() {
            lines.push(line.to_string());
        }
    }
    lines
}
