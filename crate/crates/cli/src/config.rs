//! Run configuration: one JSON file plus flag overrides, flags winning.

use crate::error::AppError;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use vlk_core::evaluator::JudgeConfig;
use vlk_core::model::{Activation, ModelConfig};
use vlk_core::{editor::Direction, Dimension};

pub const DEFAULT_TAU: f64 = 0.03;
pub const DEFAULT_GAMMA: f32 = 2.0;
pub const DEFAULT_GAMMA_GRID: [f32; 5] = [0.0, 0.5, 1.0, 1.5, 2.0];
pub const DEFAULT_TAU_GRID: [f64; 5] = [0.01, 0.02, 0.03, 0.05, 0.08];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum JudgeSetting {
    Lexical {
        #[serde(default = "default_n_runs")]
        n_runs: usize,
    },
    Remote {
        #[serde(flatten)]
        config: JudgeConfig,
    },
}

fn default_n_runs() -> usize {
    10
}

impl Default for JudgeSetting {
    fn default() -> Self {
        JudgeSetting::Lexical { n_runs: default_n_runs() }
    }
}

impl JudgeSetting {
    pub fn n_runs(&self) -> usize {
        match self {
            JudgeSetting::Lexical { n_runs } => *n_runs,
            JudgeSetting::Remote { config } => config.n_runs,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    #[serde(default)]
    pub dataset_path: Option<PathBuf>,
    #[serde(default)]
    pub dimension: Option<String>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f32,
    #[serde(default = "default_direction")]
    pub direction: String,
    #[serde(default)]
    pub judge: JudgeSetting,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub include_generation: bool,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: usize,
    /// Model shape used by `init-model`.
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub gamma_grid: Option<Vec<f32>>,
    #[serde(default)]
    pub tau_grid: Option<Vec<f64>>,
    /// Text-generation service used by `gen-items`.
    #[serde(default)]
    pub service: Option<vlk_core::chat::ServiceConfig>,
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}
fn default_gamma() -> f32 {
    DEFAULT_GAMMA
}
fn default_direction() -> String {
    "PositiveShift".to_string()
}
fn default_seed() -> u64 {
    42
}
fn default_parallelism() -> usize {
    4
}
fn default_max_new_tokens() -> usize {
    32
}

/// Flag overrides shared by the pipeline commands; any flag set here wins
/// over the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Weights file path
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset JSONL path
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Canonical dimension name
    #[arg(long)]
    pub dimension: Option<String>,
    /// Classification threshold in (0, 1)
    #[arg(long)]
    pub tau: Option<f64>,
    /// Amplification scaling factor (>= 0)
    #[arg(long)]
    pub gamma: Option<f32>,
    /// PositiveShift or NegativeShift
    #[arg(long)]
    pub direction: Option<String>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Record over prompt plus greedy continuation
    #[arg(long)]
    pub include_generation: Option<bool>,
    /// Prompt-level worker threads
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub max_new_tokens: Option<usize>,
    /// Also emit SVG charts where a command supports them
    #[arg(long, default_value_t = false)]
    pub svg: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| AppError::config(format!("config {}: {e}", path.display())))
    }

    pub fn apply(mut self, o: &Overrides) -> RunConfig {
        if let Some(v) = &o.model {
            self.model_path = Some(v.clone());
        }
        if let Some(v) = &o.dataset {
            self.dataset_path = Some(v.clone());
        }
        if let Some(v) = &o.dimension {
            self.dimension = Some(v.clone());
        }
        if let Some(v) = o.tau {
            self.tau = v;
        }
        if let Some(v) = o.gamma {
            self.gamma = v;
        }
        if let Some(v) = &o.direction {
            self.direction = v.clone();
        }
        if let Some(v) = &o.out {
            self.out_dir = Some(v.clone());
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.include_generation {
            self.include_generation = v;
        }
        if let Some(v) = o.parallelism {
            self.parallelism = v;
        }
        if let Some(v) = o.max_new_tokens {
            self.max_new_tokens = v;
        }
        self
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(AppError::config(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(AppError::config(format!(
                "gamma must be finite and non-negative, got {}",
                self.gamma
            )));
        }
        if self.parallelism == 0 {
            return Err(AppError::config("parallelism must be at least 1".to_string()));
        }
        Ok(())
    }

    pub fn dimension(&self) -> Result<Dimension, AppError> {
        let name = self
            .dimension
            .as_deref()
            .ok_or_else(|| AppError::config("no dimension configured".to_string()))?;
        Dimension::from_str(name).map_err(|e| AppError::config(e.to_string()))
    }

    pub fn direction(&self) -> Result<Direction, AppError> {
        Direction::from_str(&self.direction).map_err(|e| AppError::config(e.to_string()))
    }

    pub fn model_path(&self) -> Result<&Path, AppError> {
        self.model_path
            .as_deref()
            .ok_or_else(|| AppError::config("no model path configured".to_string()))
    }

    pub fn dataset_path(&self) -> Result<&Path, AppError> {
        self.dataset_path
            .as_deref()
            .ok_or_else(|| AppError::config("no dataset path configured".to_string()))
    }

    pub fn out_dir(&self) -> Result<&Path, AppError> {
        self.out_dir
            .as_deref()
            .ok_or_else(|| AppError::config("no output directory configured".to_string()))
    }

    pub fn gamma_grid(&self) -> Vec<f32> {
        self.gamma_grid.clone().unwrap_or_else(|| DEFAULT_GAMMA_GRID.to_vec())
    }

    pub fn tau_grid(&self) -> Vec<f64> {
        self.tau_grid.clone().unwrap_or_else(|| DEFAULT_TAU_GRID.to_vec())
    }

    /// Model shape for `init-model` when the config names none.
    pub fn model_config(&self) -> ModelConfig {
        self.model.clone().unwrap_or(ModelConfig {
            n_layers: 2,
            d_model: 32,
            n_heads: 4,
            d_ff: 64,
            vocab_size: 257,
            max_seq: 2048,
            activation: Activation::Gelu,
            seed: self.seed,
        })
    }
}
