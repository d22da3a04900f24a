//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//!
//! [model]
//! max_qubits = 6          # even, 2..=10; depth d trains on 2d qubits
//! critic = "quantum"      # or "classical"
//!
//! [train]
//! steps = 600
//! loss = "logistic"       # or "relativistic-hinge"
//! fade_steps = 100
//! stable_steps = 100
//!
//! [paths]
//! cohort = "cohort.json"
//! out_dir = "run"
//! ```
//!
//! Every key is optional except `seed`, which may instead come from the
//! command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::discriminator::ClassicalConfig;
use crate::error::{Error, Result};
use crate::generator::GeneratorConfig;
use crate::genomics::Strain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticKind {
    Quantum,
    Classical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Logistic,
    RelativisticHinge,
}

/// Architecture fields. Checkpoints record a digest of exactly these.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub max_qubits: usize,
    pub latent_dim: usize,
    pub style_dim: usize,
    pub channels: usize,
    pub noise: bool,
    pub critic: CriticKind,
    pub critic_channels: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            max_qubits: 10,
            latent_dim: 64,
            style_dim: 64,
            channels: 8,
            noise: true,
            critic: CriticKind::Quantum,
            critic_channels: 8,
        }
    }
}

impl ModelConfig {
    pub fn max_depth(&self) -> usize {
        self.max_qubits / 2
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            latent_dim: self.latent_dim,
            style_dim: self.style_dim,
            channels: self.channels,
            max_depth: self.max_depth(),
            noise: self.noise,
        }
    }

    pub fn classical(&self) -> ClassicalConfig {
        ClassicalConfig {
            channels: self.critic_channels,
            max_depth: self.max_depth(),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("model config serializes");
        Sha256::digest(&bytes).into()
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_qubits < 2 || self.max_qubits > 10 || self.max_qubits % 2 != 0 {
            return Err(Error::Config(format!("max_qubits must be even and in 2..=10, got {}", self.max_qubits)));
        }
        if self.latent_dim == 0 || self.style_dim == 0 || self.channels == 0 || self.critic_channels == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub loss: LossKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Gradient penalty; unset means on for the classical critic only.
    pub penalty: Option<bool>,
    pub fade_steps: u64,
    pub stable_steps: u64,
    pub log_interval: u64,
    /// Write a checkpoint every this many steps; 0 writes only the final one.
    pub checkpoint_interval: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 3500,
            batch_size: 8,
            loss: LossKind::Logistic,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            gamma1: 10.0,
            gamma2: 0.0,
            penalty: None,
            fade_steps: 200,
            stable_steps: 400,
            log_interval: 74,
            checkpoint_interval: 0,
        }
    }
}

impl TrainConfig {
    pub fn penalty_enabled(&self, critic: CriticKind) -> bool {
        self.penalty.unwrap_or(critic == CriticKind::Classical)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.learning_rate, self.epsilon];
        if self.batch_size == 0 || self.log_interval == 0 || positive.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("batch_size, log_interval must be positive; rates non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("moment decays must lie in [0, 1)".into()));
        }
        if self.gamma1 < 0.0 || self.gamma2 < 0.0 {
            return Err(Error::Config("penalty weights must be non-negative".into()));
        }
        if self.stable_steps == 0 {
            return Err(Error::Config("stable_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenomicsConfig {
    pub strain: Strain,
    /// Overrides the strain's preset `k`.
    pub top_k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub cohort: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            cohort: "cohort.json".into(),
            out_dir: "run".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub genomics: GenomicsConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    /// Desk-scale preset: 6 qubits, 600 steps, 100-step windows.
    pub fn test_preset() -> Self {
        Self {
            model: ModelConfig {
                max_qubits: 6,
                ..ModelConfig::default()
            },
            train: TrainConfig {
                steps: 600,
                fade_steps: 100,
                stable_steps: 100,
                ..TrainConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("a seed is required (config `seed` or --seed)".into()))
    }

    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.model.critic == CriticKind::Quantum && self.train.penalty == Some(true) {
            return Err(Error::Config("the gradient penalty is only defined for the classical critic".into()));
        }
        Ok(())
    }
}
