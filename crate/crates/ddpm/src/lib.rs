//! The diffusion engine: alpha-cosine schedule over continuous t in [0, 1],
//! forward corruption, the reverse posterior step, the epsilon-prediction
//! training loss and the iterative sampler.

mod checkpoint;
mod diffuse;
mod sampler;
mod schedule;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use diffuse::{eps_to_x, forward_diffuse, posterior_step};
pub use sampler::{sample, SamplerConfig};
pub use schedule::{schedule_at, transition_params};
pub use train::{diffuse_batch, train_loss};

use lidarseq_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DdpmError {
    #[error("time {0} outside [0, 1]")]
    TimeRange(f64),
    #[error("timestep ordering: need 0 <= s < t <= 1, got s = {s}, t = {t}")]
    Ordering { s: f64, t: f64 },
    #[error("sampler diverged: non-finite value at step {step} (t = {t})")]
    Diverged { step: usize, t: f64 },
    #[error("{0}")]
    Contract(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DdpmError>;
