//! The run configuration: a TOML document that round-trips losslessly and is
//! echoed into every output directory.

use anyhow::{Context, Result};
use lidarseq_codec::SensorConfig;
use lidarseq_ddpm::SamplerConfig;
use lidarseq_net::ModelConfig;
use lidarseq_scene::WorldParams;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Root directory for resolving relative data paths.
pub const DATA_ROOT_ENV: &str = "LIDARSEQ_DATA_ROOT";

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sensor: SensorSection,
    pub world: WorldSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub sampler: SamplerSection,
    pub data: DataSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    pub h: usize,
    pub w: usize,
    pub elev_min_deg: f64,
    pub elev_max_deg: f64,
    pub d_max: f64,
    pub reflectance: bool,
}

impl Default for SensorSection {
    fn default() -> Self {
        SensorSection {
            h: 32,
            w: 128,
            elev_min_deg: -25.0,
            elev_max_deg: 3.0,
            d_max: 80.0,
            reflectance: true,
        }
    }
}

impl SensorSection {
    pub fn to_sensor(&self) -> SensorConfig {
        SensorConfig {
            h: self.h,
            w: self.w,
            elev_min: self.elev_min_deg.to_radians(),
            elev_max: self.elev_max_deg.to_radians(),
            d_max: self.d_max,
            has_reflectance: self.reflectance,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    pub min_agents: usize,
    pub max_agents: usize,
    pub min_props: usize,
    pub max_props: usize,
    pub ego_speed_max: f64,
    pub time_weights: [f64; 4],
    pub weather_weights: [f64; 4],
    pub background_weights: [f64; 4],
}

impl Default for WorldSection {
    fn default() -> Self {
        let p = WorldParams::default();
        WorldSection {
            min_agents: p.min_agents,
            max_agents: p.max_agents,
            min_props: p.min_props,
            max_props: p.max_props,
            ego_speed_max: p.ego_speed_max,
            time_weights: p.time_weights,
            weather_weights: p.weather_weights,
            background_weights: p.background_weights,
        }
    }
}

impl WorldSection {
    pub fn to_params(&self) -> WorldParams {
        WorldParams {
            min_agents: self.min_agents,
            max_agents: self.max_agents,
            min_props: self.min_props,
            max_props: self.max_props,
            ego_speed_max: self.ego_speed_max,
            time_weights: self.time_weights,
            weather_weights: self.weather_weights,
            background_weights: self.background_weights,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub scales: usize,
    pub base_c: usize,
    pub fourier_k: usize,
    pub heads: usize,
    pub blocks_per_scale: usize,
    pub t_emb_dim: usize,
    pub caption_dim: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            scales: 4,
            base_c: 32,
            fourier_k: 6,
            heads: 4,
            blocks_per_scale: 2,
            t_emb_dim: 128,
            caption_dim: 128,
        }
    }
}

impl ModelSection {
    pub fn to_model(&self, frames: usize) -> ModelConfig {
        ModelConfig {
            scales: self.scales,
            base_c: self.base_c,
            fourier_k: self.fourier_k,
            heads: self.heads,
            blocks_per_scale: self.blocks_per_scale,
            t_emb_dim: self.t_emb_dim,
            caption_dim: self.caption_dim,
            vocab_size: lidarseq_scene::VOCAB.len(),
            frames,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch: usize,
    pub max_steps: u64,
    pub lr: f64,
    pub ema_decay: f64,
    pub seed: u64,
    pub t_floor: f64,
    pub ckpt_every: u64,
    pub log_every: u64,
    /// Smoothing factor for the logged loss EMA.
    pub loss_smoothing: f64,
    /// Stop early once smoothed loss falls below this fraction of the
    /// initial smoothed loss (0 disables early stopping).
    pub stop_loss_ratio: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            batch: 2,
            max_steps: 20_000,
            lr: 2e-4,
            ema_decay: 0.999,
            seed: 0,
            t_floor: 1e-4,
            ckpt_every: 500,
            log_every: 25,
            loss_smoothing: 0.98,
            stop_loss_ratio: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub steps: usize,
    pub seed: u64,
    pub t_floor: f64,
    /// Validity threshold on the normalized range channel when decoding
    /// generated frames to point clouds.
    pub decode_threshold: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection { steps: 256, seed: 0, t_floor: 1e-4, decode_threshold: -0.999 }
    }
}

impl SamplerSection {
    pub fn to_sampler(&self) -> SamplerConfig {
        SamplerConfig { steps: self.steps, seed: self.seed, t_floor: self.t_floor }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Frames per sequence.
    pub frames: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection { frames: 4 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("plain struct serializes")
    }

    /// Echo the exact configuration into an output directory.
    pub fn echo_into(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("run.toml"), self.to_toml())?;
        Ok(())
    }
}

/// Resolve a possibly-relative path against `LIDARSEQ_DATA_ROOT` when set.
pub fn resolve_path(p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    match std::env::var_os(DATA_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(p),
        _ => p.to_path_buf(),
    }
}
