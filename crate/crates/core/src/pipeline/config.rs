use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DType;
use crate::optim::AdamConfig;
use crate::skipnet::{ModelConfig, Setting};
use crate::synth::{AugmentPolicy, DomainShift, SynthSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub augment: AugmentPolicy,
    /// Training precision; `f64` gives bit-reproducible runs.
    pub precision: DType,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 8,
            augment: AugmentPolicy::binary(),
            precision: DType::F32,
        }
    }
}

/// Corpus directories, as written by `gen-data`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: PathBuf,
    pub val: PathBuf,
    pub test_seen: PathBuf,
    pub test_unseen: PathBuf,
}

impl DataConfig {
    /// The layout `gen-data` produces under `root`.
    pub fn under(root: impl AsRef<Path>) -> Self {
        let r = root.as_ref();
        Self {
            train: r.join("train"),
            val: r.join("val"),
            test_seen: r.join("test_seen"),
            test_unseen: r.join("test_unseen"),
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        Self::under("data")
    }
}

/// Sizes of the four generated splits; the test-unseen split applies `shift`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub spec: SynthSpec,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub unseen_shift: DomainShift,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            spec: SynthSpec::default(),
            train: 200,
            val: 50,
            test: 100,
            unseen_shift: DomainShift::unseen(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub settings: Vec<Setting>,
    pub m_values: Vec<usize>,
    pub target_scales: Vec<u32>,
    pub repetitions: Vec<usize>,
    /// Training budget per ablation cell.
    pub epochs: usize,
    /// Use only the first `n` training images (0 = all).
    pub train_subset: usize,
    /// Evaluate on the first `n` test images of each split (0 = all).
    pub eval_subset: usize,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            settings: Setting::ALL.to_vec(),
            m_values: vec![8, 16, 32, 64, 128, 256],
            target_scales: vec![2, 3, 4, 5],
            repetitions: vec![1, 3, 5],
            epochs: 10,
            train_subset: 0,
            eval_subset: 0,
        }
    }
}

/// Everything a run needs; written back fully resolved into every run
/// directory as `config.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds data order/augmentation; [`RunConfig::with_seed`] also sets the
    /// model initialisation seed.
    pub seed: u64,
    /// Seeds averaged by `eval` (one training run per seed).
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub optimizer: AdamConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub corpus: CorpusConfig,
    pub ablation: AblationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            seeds: vec![1, 2, 3],
            output_dir: PathBuf::from("runs/default"),
            model: ModelConfig::default(),
            optimizer: AdamConfig::default(),
            train: TrainConfig::default(),
            data: DataConfig::default(),
            corpus: CorpusConfig::default(),
            ablation: AblationConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.train.batch_size == 0 || self.train.epochs == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(self.optimizer.lr > 0.0 && self.optimizer.lr_min >= 0.0 && self.optimizer.lr_min <= self.optimizer.lr) {
            return Err(Error::Config("learning rates must satisfy 0 ≤ lr_min ≤ lr, lr > 0".into()));
        }
        if self.corpus.spec.size != self.model.input_size {
            return Err(Error::Config(format!(
                "corpus size {:?} differs from model input size {:?}",
                self.corpus.spec.size, self.model.input_size
            )));
        }
        Ok(())
    }

    /// Same run with both the data seed and the model seed set to `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c.model.seed = seed;
        c
    }
}
