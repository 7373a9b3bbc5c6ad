use std::path::{Path, PathBuf};

use earpipe_core::emd::EmdConfig;
use earpipe_core::features::{BalanceRatio, MfccConfig, NormalizationMode, WindowSpec};
use earpipe_core::motion::DenoiseConfig;
use earpipe_core::nnmf::NnmfConfig;
use earpipe_core::preprocess::PreprocessConfig;
use earpipe_core::rng::stream;
use earpipe_core::stft::StftConfig;
use earpipe_models::cnn::{CnnConfig, FocalConfig, TrainConfig};
use earpipe_models::forest::ForestConfig;
use earpipe_models::knn::DEFAULT_K;
use earpipe_models::svm::SvmConfig;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusConfig;
use crate::error::{EvalError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationMethod {
    Emd,
    #[default]
    Nnmf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub motion_removal: bool,
    pub denoise: DenoiseConfig,
    /// Replaces nothing: adds a [1, 30] Hz bandpass after conditioning, the
    /// conventional alternative to motion removal.
    pub bandpass_baseline: bool,
    pub separation: SeparationMethod,
    pub stft: StftConfig,
    pub nnmf: NnmfConfig,
    pub emd: EmdConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            preprocess: PreprocessConfig::default(),
            motion_removal: true,
            denoise: DenoiseConfig::default(),
            bandpass_baseline: false,
            separation: SeparationMethod::Nnmf,
            stft: StftConfig::default(),
            nnmf: NnmfConfig::default(),
            emd: EmdConfig::default(),
        }
    }
}

pub const BANDPASS_BASELINE_HZ: (f64, f64) = (1.0, 30.0);

impl PipelineConfig {
    /// Conditioning settings with the baseline bandpass folded in.
    pub fn effective_preprocess(&self) -> PreprocessConfig {
        let mut p = self.preprocess.clone();
        if self.bandpass_baseline {
            p.bandpass = Some(BANDPASS_BASELINE_HZ);
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub stride_s: u32,
    pub ratio: BalanceRatio,
    pub normalization: NormalizationMode,
    pub mfcc: MfccConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            stride_s: 1,
            ratio: BalanceRatio(1),
            normalization: NormalizationMode::MinMax,
            mfcc: MfccConfig::default(),
        }
    }
}

impl FeatureConfig {
    pub fn window(&self) -> Result<WindowSpec> {
        Ok(WindowSpec::new(self.stride_s)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Svm,
    Knn,
    Rfc,
    Cnn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::Knn => "knn",
            ModelKind::Rfc => "rfc",
            ModelKind::Cnn => "cnn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub svm: SvmConfig,
    pub knn_k: usize,
    pub forest: ForestConfig,
    pub cnn: CnnConfig,
    pub cnn_train: TrainConfig,
    pub focal: FocalConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::Svm,
            svm: SvmConfig::default(),
            knn_k: DEFAULT_K,
            forest: ForestConfig::default(),
            cnn: CnnConfig::default(),
            cnn_train: TrainConfig::default(),
            focal: FocalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Directory of recording files; the synthetic corpus is used when absent.
    pub recordings: Option<PathBuf>,
    /// Trained frequency templates; trained from the synthetic donor when absent.
    pub templates: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

/// Everything a run depends on. Sub-seeds inside the nested configs are
/// overwritten by streams derived from `rng_seed` when the config is resolved.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub rng_seed: u64,
    pub corpus: CorpusConfig,
    pub pipeline: PipelineConfig,
    pub features: FeatureConfig,
    pub model: ModelConfig,
    pub paths: Paths,
}

/// Stage tags for seed derivation.
pub mod seed_tag {
    pub const CORPUS: u64 = 1;
    pub const TEMPLATE_DONOR: u64 = 2;
    pub const NNMF: u64 = 3;
    pub const BALANCE: u64 = 4;
    pub const MODEL: u64 = 5;
    pub const CNN_INIT: u64 = 6;
}

pub fn derive_seed(master: u64, tag: u64) -> u64 {
    stream(master, tag).random()
}

/// Seed for a per-fold stage.
pub fn fold_seed(master: u64, tag: u64, fold: usize) -> u64 {
    stream(derive_seed(master, tag), fold as u64 + 1).random()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        serde_json::from_str(text).map_err(|e| {
            EvalError::config(format!("line {} column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EvalError::from(e).context(format!("reading {}", path.display())))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// Copy with every stage seed derived from the master seed.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut c = self.clone();
        let m = self.rng_seed;
        c.corpus.rng_seed = derive_seed(m, seed_tag::CORPUS);
        c.pipeline.nnmf.rng_seed = derive_seed(m, seed_tag::NNMF);
        c.model.forest.rng_seed = derive_seed(m, seed_tag::MODEL);
        c.model.cnn_train.rng_seed = derive_seed(m, seed_tag::MODEL);
        c.model.cnn.init_seed = derive_seed(m, seed_tag::CNN_INIT);
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.recordings.is_none() {
            self.corpus.validate()?;
        }
        self.features.window()?;
        self.features.mfcc.validate()?;
        self.pipeline.nnmf.validate()?;
        self.pipeline.stft.validate()?;
        self.pipeline.emd.validate()?;
        self.pipeline.denoise.vmd.validate()?;
        self.pipeline.effective_preprocess().validate(earpipe_core::signals::DEFAULT_SAMPLE_RATE)?;
        self.model.svm.validate()?;
        if self.model.knn_k == 0 {
            return Err(EvalError::config("knn_k must be at least 1"));
        }
        if self.model.kind == ModelKind::Cnn {
            self.model.cnn.validate()?;
            self.model.cnn_train.validate()?;
        }
        Ok(())
    }
}
