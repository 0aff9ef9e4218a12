//! Pipeline configuration (TOML). Every knob has a pinned default; the CLI
//! flags `--seed`, `--jobs` and `--out` override the file.

use ppgmorph_core::synth::CohortSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Single source of all run randomness: cohort generation, augmentation,
    /// splitting and model init derive their streams from it.
    pub seed: u64,
    /// Worker-pool size for per-subject stages; 0 means one per core.
    pub jobs: usize,
    pub cohort: CohortSpec,
    pub filter: FilterConfig,
    pub ma: MaConfig,
    pub detrend: DetrendConfig,
    pub envelope: EnvelopeConfig,
    pub beats: BeatsConfig,
    pub features: FeaturesConfig,
    pub train: TrainConfig,
    pub split: SplitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub order: usize,
    pub stopband_hz: f64,
    pub atten_db: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            order: 4,
            stopband_hz: 10.0,
            atten_db: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaConfig {
    pub window: usize,
}

impl Default for MaConfig {
    fn default() -> Self {
        MaConfig { window: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetrendConfig {
    pub window_s: f64,
}

impl Default for DetrendConfig {
    fn default() -> Self {
        DetrendConfig { window_s: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvelopeConfig {
    pub window_s: f64,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        EnvelopeConfig { window_s: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeatsConfig {
    pub beat_len: usize,
    pub corr_gate: f64,
    pub min_beats: usize,
}

impl Default for BeatsConfig {
    fn default() -> Self {
        BeatsConfig {
            beat_len: 400,
            corr_gate: 0.8,
            min_beats: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeaturesConfig {
    pub rank_k: usize,
    pub augment_factor: usize,
    pub augment_sigma: f64,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        FeaturesConfig {
            rank_k: 26,
            augment_factor: 15,
            augment_sigma: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_ffnn: f64,
    pub lr_cnn: f64,
    pub lr_linear: f64,
    pub l1: f64,
    pub l2: f64,
    pub dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch_size: 32,
            lr_ffnn: 1e-2,
            lr_cnn: 2e-2,
            lr_linear: 1e-2,
            l1: 1e-4,
            l2: 1e-4,
            dropout: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 7,
            jobs: 0,
            cohort: CohortSpec::default(),
            filter: FilterConfig::default(),
            ma: MaConfig::default(),
            detrend: DetrendConfig::default(),
            envelope: EnvelopeConfig::default(),
            beats: BeatsConfig::default(),
            features: FeaturesConfig::default(),
            train: TrainConfig::default(),
            split: SplitConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| anyhow::anyhow!("bad config {}: {e}", path.display()))?;
        Ok(cfg)
    }

    /// Canonical TOML snapshot (used for hashing and the manifest).
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Stage seeds derived from the manifest seed.
    pub fn seed_for(&self, stage: StageSeed) -> u64 {
        self.seed.wrapping_add(stage as u64)
    }
}

/// Fixed offsets so every consumer of randomness has its own stream.
#[derive(Debug, Clone, Copy)]
pub enum StageSeed {
    Cohort = 0,
    Augment = 1,
    Split = 2,
    ModelFfnn = 3,
    ModelCnn = 4,
    ModelLogistic = 5,
    ModelLinear = 6,
}
