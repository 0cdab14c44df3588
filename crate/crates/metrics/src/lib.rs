//! Generation-quality metrics over point clouds and range-image sequences:
//! BEV-occupancy MMD (reported x 1e4) and JSD, and Frechet distances over
//! frame features (FRD) and short-clip features (FVD).
//!
//! The feature extractor is a fixed-seed random convolutional encoder, so
//! absolute FRD/FVD values are NOT comparable to published numbers computed
//! with pretrained networks; only orderings and zero-identity properties are
//! meaningful, and every report says so in its header.

mod bev;
mod extractor;
mod frechet;
mod kernels;
mod report;

pub use bev::{bev_histogram, BevConfig, BevHistogram};
pub use extractor::{FeatureExtractor, FEATURE_DIM};
pub use frechet::{frechet, frechet_from_moments};
pub use kernels::{jsd, mmd};
pub use report::{evaluate_run, featurize, DatasetFeatures, EvalConfig, EvalReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("estimator: {0}")]
    Estimator(String),
    #[error("undefined input: {0}")]
    Undefined(String),
    #[error("ingestion: {0}")]
    Ingestion(String),
    #[error(transparent)]
    Tensor(#[from] lidarseq_tensor::TensorError),
    #[error(transparent)]
    Codec(#[from] lidarseq_codec::CodecError),
    #[error(transparent)]
    Scene(#[from] lidarseq_scene::SceneError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MetricsError>;
