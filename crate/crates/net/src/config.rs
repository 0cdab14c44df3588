//! Model topology, echoed into every checkpoint manifest.

use crate::{NetError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    /// Resolution scales (3 or 4); channel widths are base_c << scale.
    pub scales: usize,
    pub base_c: usize,
    /// Fourier feature octaves per coordinate (adds 4*K channels).
    pub fourier_k: usize,
    pub heads: usize,
    pub blocks_per_scale: usize,
    pub t_emb_dim: usize,
    pub caption_dim: usize,
    pub vocab_size: usize,
    /// Sequence length the model was trained on (metadata only; the forward
    /// pass accepts any F).
    pub frames: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            scales: 4,
            base_c: 32,
            fourier_k: 6,
            heads: 4,
            blocks_per_scale: 2,
            t_emb_dim: 128,
            caption_dim: 128,
            vocab_size: 16,
            frames: 4,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.scales) {
            return Err(NetError::Config(format!("scales = {} not in 2..=4", self.scales)));
        }
        // fourier_k = 0 is allowed: it drops the coordinate features, which
        // restores exact azimuthal shift equivariance of the conv paths
        for (what, v) in [
            ("base_c", self.base_c),
            ("heads", self.heads),
            ("blocks_per_scale", self.blocks_per_scale),
            ("t_emb_dim", self.t_emb_dim),
            ("caption_dim", self.caption_dim),
            ("vocab_size", self.vocab_size),
            ("frames", self.frames),
        ] {
            if v == 0 {
                return Err(NetError::Config(format!("{} must be positive", what)));
            }
        }
        if self.t_emb_dim % 2 != 0 {
            return Err(NetError::Config("t_emb_dim must be even".into()));
        }
        for s in 0..self.scales {
            let c = self.width(s);
            if c % self.heads != 0 {
                return Err(NetError::Config(format!(
                    "width {} at scale {} not divisible by {} heads",
                    c, s, self.heads
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self, scale: usize) -> usize {
        self.base_c << scale
    }

    /// Largest group count <= 8 dividing the channel width.
    pub fn gn_groups(c: usize) -> usize {
        (1..=8usize).rev().find(|g| c % g == 0).unwrap_or(1)
    }

    /// Input H and W must survive `scales - 1` halvings.
    pub fn check_resolution(&self, h: usize, w: usize) -> Result<()> {
        let div = 1usize << (self.scales - 1);
        if h % div != 0 || w % div != 0 || h / div == 0 || w / div == 0 {
            return Err(NetError::Config(format!(
                "{}x{} not divisible into {} scales (needs multiples of {})",
                h, w, self.scales, div
            )));
        }
        Ok(())
    }

    pub fn to_meta(&self) -> Vec<(String, String)> {
        [
            ("model_scales", self.scales.to_string()),
            ("model_base_c", self.base_c.to_string()),
            ("model_fourier_k", self.fourier_k.to_string()),
            ("model_heads", self.heads.to_string()),
            ("model_blocks_per_scale", self.blocks_per_scale.to_string()),
            ("model_t_emb_dim", self.t_emb_dim.to_string()),
            ("model_caption_dim", self.caption_dim.to_string()),
            ("model_vocab_size", self.vocab_size.to_string()),
            ("model_frames", self.frames.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn from_meta(meta: &[(String, String)]) -> Result<Self> {
        let get = |key: &str| -> Result<usize> {
            meta.iter()
                .find(|(k, _)| k == key)
                .ok_or_else(|| NetError::Checkpoint(format!("missing meta key '{}'", key)))?
                .1
                .parse()
                .map_err(|_| NetError::Checkpoint(format!("bad meta value for '{}'", key)))
        };
        let cfg = ModelConfig {
            scales: get("model_scales")?,
            base_c: get("model_base_c")?,
            fourier_k: get("model_fourier_k")?,
            heads: get("model_heads")?,
            blocks_per_scale: get("model_blocks_per_scale")?,
            t_emb_dim: get("model_t_emb_dim")?,
            caption_dim: get("model_caption_dim")?,
            vocab_size: get("model_vocab_size")?,
            frames: get("model_frames")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
