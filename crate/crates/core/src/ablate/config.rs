//! Declarative experiment configurations and the built-in preset suite.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{AvqError, Result};
use crate::heads::ScoreMode;
use crate::model::{Aggregation, FeatureSelection};
use crate::nn::TrainingHyperparams;

/// Which head sits on top of the encoder chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    #[default]
    Softmax,
    Svr,
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeadKind::Softmax => "softmax",
            HeadKind::Svr => "svr",
        })
    }
}

impl FromStr for HeadKind {
    type Err = AvqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax" => Ok(HeadKind::Softmax),
            "svr" => Ok(HeadKind::Svr),
            other => Err(AvqError::Config(format!("unknown head kind `{}`", other))),
        }
    }
}

/// Head hyperparameters; softmax and SVR fields coexist so one config block
/// can switch heads without restructuring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadParams {
    /// Number of quality classes for the softmax head.
    pub num_classes: usize,
    pub score_mode: ScoreMode,
    /// L2 penalty on the softmax weights.
    pub l2_weight: f64,
    pub svr_c: f64,
    pub svr_epsilon: f64,
    /// RBF width; unset picks 1 / (d * var).
    pub svr_gamma: Option<f64>,
    /// Solver budget for the SVR optimizer; unset keeps the solver default.
    pub svr_max_pair_updates: Option<usize>,
}

impl Default for HeadParams {
    fn default() -> Self {
        HeadParams {
            num_classes: 4,
            score_mode: ScoreMode::Expectation,
            l2_weight: 1e-4,
            svr_c: 1.0,
            svr_epsilon: 0.1,
            svr_gamma: None,
            svr_max_pair_updates: None,
        }
    }
}

impl HeadParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(AvqError::Config(format!(
                "num_classes must be at least 2, got {}",
                self.num_classes
            )));
        }
        if self.l2_weight < 0.0 {
            return Err(AvqError::Config("l2_weight must be >= 0".into()));
        }
        if self.svr_c <= 0.0 {
            return Err(AvqError::Config("svr_c must be > 0".into()));
        }
        if self.svr_epsilon < 0.0 {
            return Err(AvqError::Config("svr_epsilon must be >= 0".into()));
        }
        if let Some(g) = self.svr_gamma {
            if g <= 0.0 {
                return Err(AvqError::Config("svr_gamma must be > 0".into()));
            }
        }
        if self.svr_max_pair_updates == Some(0) {
            return Err(AvqError::Config("svr_max_pair_updates must be > 0".into()));
        }
        Ok(())
    }
}

fn default_cv_k() -> usize {
    10
}

/// One experiment: a model architecture plus its cross-validation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    pub name: String,
    #[serde(default)]
    pub feature_selection: FeatureSelection,
    /// Hidden layer widths of the encoder chain; empty means no chain.
    #[serde(default)]
    pub dims: Vec<usize>,
    #[serde(default)]
    pub head: HeadKind,
    #[serde(default)]
    pub head_params: HeadParams,
    #[serde(default = "default_cv_k")]
    pub cv_k: usize,
    #[serde(default)]
    pub seed: u64,
    /// Autoencoder training settings; the config seed overrides the one here.
    #[serde(default)]
    pub training: TrainingHyperparams,
    #[serde(default)]
    pub aggregation: Aggregation,
    /// Joint chain+softmax refinement after greedy stacking.
    #[serde(default)]
    pub fine_tune: bool,
}

impl AblationConfig {
    /// A config with everything defaulted except the identity fields.
    pub fn preset(name: &str, selection: FeatureSelection, dims: &[usize], head: HeadKind) -> Self {
        AblationConfig {
            name: name.to_string(),
            feature_selection: selection,
            dims: dims.to_vec(),
            head,
            head_params: HeadParams::default(),
            cv_k: default_cv_k(),
            seed: 0,
            training: TrainingHyperparams::default(),
            aggregation: Aggregation::default(),
            fine_tune: false,
        }
    }

    /// Dimension trace of the encoder chain, input first.
    pub fn dim_trace(&self) -> Vec<usize> {
        let mut trace = vec![self.feature_selection.input_dim()];
        trace.extend_from_slice(&self.dims);
        trace
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(AvqError::Config("config name must not be empty".into()));
        }
        if self.dims.iter().any(|d| *d == 0) {
            return Err(AvqError::Config(format!(
                "config `{}` has a zero chain dimension",
                self.name
            )));
        }
        if self.cv_k < 2 {
            return Err(AvqError::Config(format!(
                "config `{}`: cv_k must be at least 2, got {}",
                self.name, self.cv_k
            )));
        }
        self.head_params.validate()?;
        self.training.validate()?;
        let trace = self.dim_trace();
        for pair in trace.windows(2) {
            if pair[1] >= pair[0] {
                log::warn!(
                    "config `{}`: chain dimension {} does not shrink from {}",
                    self.name,
                    pair[1],
                    pair[0]
                );
            }
        }
        Ok(())
    }
}

/// An ordered list of experiments sharing one dataset and fold split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSuite {
    /// Fold count shared by every config in a suite run.
    #[serde(default = "default_cv_k")]
    pub cv_k: usize,
    /// Seed for the shared fold split.
    #[serde(default)]
    pub seed: u64,
    pub configs: Vec<AblationConfig>,
}

impl AblationSuite {
    pub fn validate(&self) -> Result<()> {
        if self.configs.is_empty() {
            return Err(AvqError::Config("suite has no configs".into()));
        }
        if self.cv_k < 2 {
            return Err(AvqError::Config(format!(
                "suite cv_k must be at least 2, got {}",
                self.cv_k
            )));
        }
        for config in &self.configs {
            config.validate()?;
        }
        for (i, a) in self.configs.iter().enumerate() {
            for b in &self.configs[i + 1..] {
                if a.name == b.name {
                    return Err(AvqError::Config(format!(
                        "duplicate config name `{}`",
                        a.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The canonical nine-experiment suite: the baseline plus the layer-count,
/// node-count, feature-selection, and head ablations.
pub fn builtin_presets() -> AblationSuite {
    use FeatureSelection::{AudioOnly, Av, VideoOnly};
    use HeadKind::{Softmax, Svr};
    AblationSuite {
        cv_k: default_cv_k(),
        seed: 0,
        configs: vec![
            AblationConfig::preset("Baseline", Av, &[60, 25], Softmax),
            AblationConfig::preset("Layers-0", Av, &[], Softmax),
            AblationConfig::preset("Layers-3", Av, &[90, 40, 25], Softmax),
            AblationConfig::preset("Layers-4", Av, &[100, 70, 50, 25], Softmax),
            AblationConfig::preset("Nodes-10", Av, &[60, 10], Softmax),
            AblationConfig::preset("Nodes-50", Av, &[60, 50], Softmax),
            AblationConfig::preset("VF", VideoOnly, &[50, 20], Softmax),
            AblationConfig::preset("AF", AudioOnly, &[18, 10], Softmax),
            AblationConfig::preset("SVR", Av, &[60, 25], Svr),
        ],
    }
}

/// Parses and validates a single config from a TOML file.
pub fn load_config(path: &Path) -> Result<AblationConfig> {
    let text = fs::read_to_string(path).map_err(|e| AvqError::io(path, e))?;
    let config: AblationConfig = toml::from_str(&text)
        .map_err(|e| AvqError::Config(format!("{}: {}", path.display(), e)))?;
    config.validate()?;
    Ok(config)
}

/// Parses and validates a suite from a TOML file.
pub fn load_suite(path: &Path) -> Result<AblationSuite> {
    let text = fs::read_to_string(path).map_err(|e| AvqError::io(path, e))?;
    let suite: AblationSuite = toml::from_str(&text)
        .map_err(|e| AvqError::Config(format!("{}: {}", path.display(), e)))?;
    suite.validate()?;
    Ok(suite)
}
