//! The sequential noise predictor: a UNet over equirectangular image
//! sequences whose basic block blends a circular-padded spatial conv path
//! (with Fourier pixel-coordinate features) against a (3,1,1) temporal conv
//! path through a learnable alpha, with factorized space/time attention and
//! caption cross-attention at the bottleneck.
//!
//! Condition paths:
//! - road sketch: channel-concatenated onto the noised input (pixel aligned);
//! - object prior: a zero-initialized copy of the encoder whose per-scale
//!   projections are added to the skip tensors;
//! - caption: token embeddings fused with the timestep embedding, attended
//!   to by bottleneck tokens through a zero-initialized output projection.
//!
//! Every zero-initialized path leaves the backbone output bit-identical at
//! initialization.

mod attn;
mod blocks;
mod config;
mod embed;
mod params;
mod unet;

pub use attn::{caption_cross_attention, CaptionCrossAttention, FactorizedSpaceTime};
pub use blocks::SpatioTemporalBlock;
pub use config::ModelConfig;
pub use embed::{fourier_features, timestep_embedding};
pub use params::ParamStore;
pub use unet::{ConditionBatch, SeqUNet};

use lidarseq_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("model config: {0}")]
    Config(String),
    #[error("{0}")]
    Shape(String),
    #[error("vocabulary: {0}")]
    Vocabulary(String),
    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, NetError>;
